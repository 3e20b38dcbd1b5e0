"""Synthetic 2D teacher: feature construction, flood-fill masks, datasets."""

from __future__ import annotations

import json

import numpy as np
import pytest

from meshseg.geometry import NEGATIVE, POSITIVE
from meshseg.rasterizer import (Camera, pixel_normals, project_click, rasterize,
                                shade_attributes)
from meshseg.shapes import icosphere, torus
from meshseg.teacher import (DATASET_VERSION, FileTeacher, PromptPixel, SyntheticTeacher,
                             TeacherError, TeacherSample, load_dataset, prompt_key,
                             save_dataset, validate_dataset, _box_blur_covered,
                             _flood_fill)

MESH = icosphere(2)
CAM = Camera(azimuth=0.4, elevation=0.3, radius=2.5, width=48, height=48)
RASTER = rasterize(MESH, CAM)


def prompt_at_vertex(vid, sign=POSITIVE, cam=CAM, raster=RASTER):
    (px, py), vis = project_click(MESH, cam, vid, raster)
    assert vis and raster.coverage[py, px]
    return PromptPixel(px, py, sign)


def test_prompt_pixel_contract():
    with pytest.raises(TeacherError):
        PromptPixel(1, 2, "plus")
    p = PromptPixel(3, 4, NEGATIVE)
    assert PromptPixel.from_dict(p.to_dict()) == p
    a = [PromptPixel(1, 1, POSITIVE), PromptPixel(2, 2, NEGATIVE)]
    assert prompt_key(a) == prompt_key(list(reversed(a)))


def test_teacher_deterministic_across_instances():
    f1 = SyntheticTeacher(d=32).embed(MESH, CAM, RASTER)
    f2 = SyntheticTeacher(d=32).embed(MESH, CAM, RASTER)
    assert np.array_equal(f1, f2)
    assert not np.array_equal(f1, SyntheticTeacher(d=32, seed=7).embed(MESH, CAM, RASTER))


def test_teacher_features_bounded_and_masked():
    feats = SyntheticTeacher(d=16).embed(MESH, CAM, RASTER)
    assert feats.shape == (48, 48, 16)
    assert np.abs(feats).max() < 1.0  # tanh then convex average
    assert not feats[~RASTER.coverage].any()


def test_embed_matches_brute_force_pipeline():
    teacher = SyntheticTeacher(d=8)
    feats = teacher.embed(MESH, CAM, RASTER)
    normals = pixel_normals(MESH, RASTER)
    world = shade_attributes(RASTER, MESH.vertices, MESH.faces)
    cov = RASTER.coverage
    h, w = cov.shape
    pre = np.zeros((h, w, 8))
    for r in range(h):
        for c in range(w):
            if not cov[r, c]:
                continue
            x = np.concatenate([normals[r, c], [RASTER.depth[r, c]], world[r, c]])
            pre[r, c] = np.tanh(teacher.A @ x + teacher.b)
    ref = np.zeros_like(pre)
    for r in range(h):
        for c in range(w):
            if not cov[r, c]:
                continue
            acc = np.zeros(8)
            cnt = 0
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and cov[rr, cc]:
                        acc += pre[rr, cc]
                        cnt += 1
            ref[r, c] = acc / cnt
    assert np.abs(feats - ref).max() < 1e-12


def test_depth_column_scaled_down():
    teacher = SyntheticTeacher(d=64)
    col_norm = np.abs(teacher.A).mean(axis=0)
    # Depth is the only view-dependent input; its column is 3x smaller.
    assert col_norm[3] < 0.5 * col_norm[0:3].mean()
    assert col_norm[3] < 0.5 * col_norm[4:7].mean()


def test_box_blur_covered_constant_field_fixed_point():
    cov = np.zeros((6, 6), dtype=bool)
    cov[1:5, 2:5] = True
    feats = np.where(cov[:, :, None], 3.25, 0.0)
    out = _box_blur_covered(feats, cov)
    assert np.allclose(out[cov], 3.25)
    assert not out[~cov].any()


def test_flood_fill_matches_bfs_oracle():
    rng = np.random.default_rng(5)
    for trial in range(5):
        eligible = rng.uniform(size=(12, 12)) > 0.35
        depth = rng.uniform(0.0, 1.0, size=(12, 12))
        ys, xs = np.where(eligible)
        y, x = int(ys[0]), int(xs[0])
        thr = 0.4
        mask = _flood_fill(eligible, depth, x, y, thr)
        # Plain stack-based BFS over the same adjacency rule.
        seen = np.zeros_like(eligible)
        stack = [(y, x)]
        seen[y, x] = True
        while stack:
            r, c = stack.pop()
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                rr, cc = r + dr, c + dc
                if not (0 <= rr < 12 and 0 <= cc < 12):
                    continue
                if seen[rr, cc] or not eligible[rr, cc]:
                    continue
                if abs(depth[rr, cc] - depth[r, c]) >= thr:
                    continue
                seen[rr, cc] = True
                stack.append((rr, cc))
        assert np.array_equal(mask, seen), f"trial {trial}"


def test_mask_contains_prompt_and_respects_coverage():
    teacher = SyntheticTeacher(d=8)
    front = int(np.argmax(MESH.vertices @ (CAM.eye() / np.linalg.norm(CAM.eye()))))
    prompt = prompt_at_vertex(front)
    mask = teacher.segment(MESH, CAM, [prompt], RASTER)
    assert mask[prompt.y, prompt.x]
    assert not (mask & ~RASTER.coverage).any()
    assert 0 < mask.sum() < RASTER.coverage.sum()


def test_negative_prompt_subtracts():
    teacher = SyntheticTeacher(d=8)
    eye_dir = CAM.eye() / np.linalg.norm(CAM.eye())
    order = np.argsort(-(MESH.vertices @ eye_dir))
    pos = prompt_at_vertex(int(order[0]))
    neg_vid = next(v for v in order[1:40]
                   if project_click(MESH, CAM, int(v), RASTER)[1])
    neg = prompt_at_vertex(int(neg_vid), NEGATIVE)
    base = teacher.segment(MESH, CAM, [pos], RASTER)
    cut = teacher.segment(MESH, CAM, [pos, neg], RASTER)
    assert not cut[neg.y, neg.x]
    assert (cut & ~base).sum() == 0  # subtraction only removes pixels
    with pytest.raises(TeacherError):
        teacher.segment(MESH, CAM, [neg], RASTER)


def test_mask_limited_by_normal_cone():
    # On a sphere the 30-degree cone around the prompt normal bounds the
    # mask by the corresponding spherical cap, regardless of flood details.
    teacher = SyntheticTeacher(d=8)
    front = int(np.argmax(MESH.vertices @ (CAM.eye() / np.linalg.norm(CAM.eye()))))
    prompt = prompt_at_vertex(front)
    mask = teacher.segment(MESH, CAM, [prompt], RASTER)
    normals = pixel_normals(MESH, RASTER)
    n_ref = normals[prompt.y, prompt.x]
    cos = normals[mask] @ n_ref
    assert cos.min() > teacher.cos_thr


def test_prompt_off_coverage_rejected():
    teacher = SyntheticTeacher(d=8)
    bg = np.argwhere(~RASTER.coverage)[0]
    with pytest.raises(TeacherError):
        teacher.segment(MESH, CAM, [PromptPixel(int(bg[1]), int(bg[0]), POSITIVE)],
                        RASTER)


def test_teacher_sample_validation():
    mask = np.zeros((CAM.height, CAM.width), dtype=bool)
    with pytest.raises(TeacherError):
        TeacherSample("v0", CAM, [PromptPixel(1, 1, NEGATIVE)], mask)
    with pytest.raises(TeacherError):
        TeacherSample("v0", CAM, [PromptPixel(99, 1, POSITIVE)], mask)
    with pytest.raises(TeacherError):
        TeacherSample("v0", CAM, [PromptPixel(1, 1, POSITIVE)], np.zeros((3, 3), bool))


def make_samples(teacher, count=3):
    sampler_cams = [Camera(azimuth=0.5 * i, elevation=0.2, radius=2.5,
                           width=32, height=32) for i in range(count)]
    samples = []
    for i, cam in enumerate(sampler_cams):
        raster = rasterize(MESH, cam)
        eye_dir = cam.eye() / np.linalg.norm(cam.eye())
        vid = int(np.argmax(MESH.vertices @ eye_dir))
        (px, py), _ = project_click(MESH, cam, vid, raster)
        prompts = [PromptPixel(px, py, POSITIVE)]
        samples.append(TeacherSample(
            view_id=f"v{i:05d}",
            camera=cam,
            prompts=prompts,
            mask=teacher.segment(MESH, cam, prompts, raster),
            features=teacher.embed(MESH, cam, raster).astype(np.float32),
        ))
    return samples


def test_dataset_round_trip(tmp_path):
    teacher = SyntheticTeacher(d=8)
    samples = make_samples(teacher)
    save_dataset(tmp_path, samples, feature_dim=8)
    back = load_dataset(tmp_path)
    assert len(back) == 3
    for a, b in zip(samples, back):
        assert a.view_id == b.view_id
        assert a.camera == b.camera
        assert a.prompts == b.prompts
        assert np.array_equal(a.mask, b.mask)
        assert np.array_equal(a.features, b.features)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["version"] == DATASET_VERSION
    assert manifest["kind"] == "teacher-dataset"
    assert {"view_id", "camera", "prompts", "mask_file", "feature_file"} <= \
        set(manifest["samples"][0])


def test_dataset_shares_feature_files_per_view(tmp_path):
    teacher = SyntheticTeacher(d=8)
    s = make_samples(teacher, count=1)[0]
    twin = TeacherSample(view_id=s.view_id, camera=s.camera,
                         prompts=[PromptPixel(s.prompts[0].x, s.prompts[0].y, POSITIVE),
                                  ],
                         mask=~s.mask & rasterize(MESH, s.camera).coverage,
                         features=s.features)
    save_dataset(tmp_path, [s, twin], feature_dim=8)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    files = [rec["feature_file"] for rec in manifest["samples"]]
    assert files[0] == files[1]
    assert len(list((tmp_path / "features").iterdir())) == 1


def test_file_teacher_replays(tmp_path):
    teacher = SyntheticTeacher(d=8)
    samples = make_samples(teacher)
    save_dataset(tmp_path, samples, feature_dim=8)
    ft = FileTeacher(tmp_path)
    s = samples[1]
    assert np.array_equal(ft.embed(s.view_id), s.features)
    reordered = list(reversed(s.prompts))
    assert np.array_equal(ft.segment(s.view_id, reordered), s.mask)
    with pytest.raises(TeacherError):
        ft.embed("missing")
    with pytest.raises(TeacherError):
        ft.segment(s.view_id, [PromptPixel(0, 0, POSITIVE)])


def test_validate_dataset_clean_and_corrupted(tmp_path):
    teacher = SyntheticTeacher(d=8)
    samples = make_samples(teacher)
    save_dataset(tmp_path, samples, feature_dim=8)
    assert validate_dataset(tmp_path) == []
    assert validate_dataset(tmp_path, mesh=MESH) == []
    assert validate_dataset(tmp_path, mesh=MESH, teacher=teacher) == []

    # Flip one mask pixel: caught only by full replay.
    mask_file = tmp_path / "masks" / "00001.pgm"
    data = bytearray(mask_file.read_bytes())
    data[-1] ^= 0xFF
    mask_file.write_bytes(bytes(data))
    errs = validate_dataset(tmp_path, mesh=MESH, teacher=teacher)
    assert any("replay" in e for e in errs)

    # Remove a required manifest field.
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    del manifest["feature_dim"]
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    errs = validate_dataset(tmp_path)
    assert any("feature_dim" in e for e in errs)

    (tmp_path / "manifest.json").write_text("{broken")
    assert any("unreadable" in e for e in validate_dataset(tmp_path))


def test_validate_dataset_flags_offcoverage_mask(tmp_path):
    teacher = SyntheticTeacher(d=8)
    samples = make_samples(teacher, count=1)
    bad_mask = samples[0].mask.copy()
    bad_mask[0, 0] = True  # corner pixel is background in every view here
    samples[0] = TeacherSample(view_id=samples[0].view_id, camera=samples[0].camera,
                               prompts=samples[0].prompts, mask=bad_mask,
                               features=samples[0].features)
    save_dataset(tmp_path, samples, feature_dim=8)
    errs = validate_dataset(tmp_path, mesh=MESH)
    assert any("outside coverage" in e for e in errs)


def test_load_dataset_rejects_wrong_version(tmp_path):
    teacher = SyntheticTeacher(d=8)
    save_dataset(tmp_path, make_samples(teacher, count=1), feature_dim=8)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    manifest["version"] = 99
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(TeacherError):
        load_dataset(tmp_path)
