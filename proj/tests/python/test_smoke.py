import math

import pytest

import coopfuse as cf


def test_version():
    assert cf.__version__ == "0.1.0"


def test_bev_iou_half_offset():
    a = cf.BBox7(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0)
    b = cf.BBox7(0.5, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0)
    assert cf.bev_iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert cf.bev_iou(a, a) == pytest.approx(1.0, abs=1e-12)


def test_fuse_recovers_exact_copies():
    gt = cf.BBox7(3.0, -2.0, 0.8, 1.9, 4.4, 1.6, 0.3)
    dets = [cf.Detection(gt, s) for s in (0.9, 0.6, 0.4)]
    fused = cf.fuse_proposals([(0, dets)], cf.MatchConfig())
    assert len(fused) == 1
    m = fused[0].box
    for got, want in ((m.x, gt.x), (m.y, gt.y), (m.z, gt.z),
                      (m.w, gt.w), (m.l, gt.l), (m.h, gt.h)):
        assert got == pytest.approx(want, abs=1e-9)
    assert cf.angle_diff_abs(m.r, gt.r) <= 1e-9


def test_cpm_roundtrip_bytes():
    msg = cf.Cpm()
    msg.sender_id = 7
    msg.pose = cf.Pose2(1.0, -2.0, 0.25)
    msg.proposals = [cf.Detection(cf.BBox7(10.0, 5.0, 0.8, 2.0, 4.5, 1.5, -0.7), 0.85)]
    msg.correction_points = [
        cf.LandmarkPoint(4.0, 9.0, cf.LandmarkClass.POLE),
        cf.LandmarkPoint(-3.5, 2.25, cf.LandmarkClass.VEHICLE_CENTER),
    ]
    data = cf.encode_cpm(msg)
    assert len(data) == cf.cpm_size(msg) == 36 + 15 + 2 * 5
    decoded = cf.decode_cpm(data)
    assert cf.encode_cpm(decoded) == data
    assert decoded.sender_id == 7
    assert decoded.correction_points[0].cls == cf.LandmarkClass.POLE


def test_simulate_and_evaluate():
    sim = cf.SimConfig()
    sim.n_vehicles = 12
    sim.n_cavs = 3
    frame = cf.generate_frame(sim, cf.frame_seed(7, 0))
    assert len(frame.vehicles) == 12
    assert frame.cav_vehicle[0] >= 0

    select = cf.SelectConfig()
    select.n_kpts = 64
    select.n_ch = 8
    ef = cf.to_eval_frame(frame, select)
    assert len(ef.cpm_sizes) == 1 + len(ef.coop)

    results = cf.evaluate_run([ef], cf.make_pipeline_config(cf.AppConfig(), cf.Pipeline.NO_FUSION, 0),
                              [0.5])
    assert len(results) == 1
    assert 0.0 <= results[0].ap <= 1.0


def test_correct_cpm_identity():
    pts = [cf.LandmarkPoint(float(i), float(i % 3), cf.LandmarkClass.POLE) for i in range(6)]
    corr = cf.correct_cpm(pts, pts, cf.ConsensusConfig())
    assert corr.confident
    assert corr.dx == pytest.approx(0.0, abs=1e-9)
    assert corr.dy == pytest.approx(0.0, abs=1e-9)
    assert corr.dyaw == pytest.approx(0.0, abs=1e-9)


def test_angle_helpers():
    assert cf.normalize_angle(3 * math.pi) == pytest.approx(math.pi, abs=1e-12)
    assert cf.angle_diff_abs(math.pi - 0.01, -math.pi + 0.01) == pytest.approx(0.02, abs=1e-12)
