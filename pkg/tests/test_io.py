import json
import math

import numpy as np
import pytest

from conftest import SMALL, random_signals
from smeta import io
from smeta.errors import BadEnum, InconsistentWidth, ParseError, SchemaMismatch
from smeta.models import Variant, build_bundle
from smeta.signals import AlignmentConfig, align_dataset, group_by_subject
from smeta.synth import SynthConfig, generate_synthetic

HEADER = "dataset_id,subject_id,side,label,v0,v1,v2\n"


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- signal CSV


def test_dataset_round_trip(tmp_path):
    source, target = generate_synthetic(SynthConfig(n_subjects_source=4, source_signals=8, n_subjects_target=3))
    io.save_dataset(target, tmp_path / "t.csv")
    back = io.load_dataset(tmp_path / "t.csv")
    assert len(back) == len(target)
    for a, b in zip(target, back):
        assert a.values.tobytes() == b.values.tobytes()
        assert (a.subject_id, a.side, a.class_label, a.dataset_id) == (b.subject_id, b.side, b.class_label, b.dataset_id)


def test_target_file_has_80_signals_over_40_subjects(tmp_path):
    _, target = generate_synthetic(SynthConfig())
    io.save_dataset(target, tmp_path / "t.csv")
    back = io.load_dataset(tmp_path / "t.csv")
    assert len(back) == 80 and len(group_by_subject(back)) == 40


def test_aligned_round_trip_keeps_offsets(tmp_path):
    source, _ = generate_synthetic(SynthConfig(n_subjects_source=2, source_signals=2, n_subjects_target=1))
    aligned = align_dataset(source, AlignmentConfig())
    io.save_aligned(aligned, tmp_path / "a.csv")
    back = io.load_aligned(tmp_path / "a.csv")
    assert [s.parent_offset for s in back] == [s.parent_offset for s in aligned]
    assert all(a.values.tobytes() == b.values.tobytes() for a, b in zip(aligned, back))


def test_bad_side_reports_line(tmp_path):
    p = write(tmp_path, HEADER + "s,A,L,0,1,2,3\ns,A,X,0,1,2,3\n")
    with pytest.raises(BadEnum) as exc:
        io.load_dataset(p)
    assert exc.value.line == 3


def test_bad_label(tmp_path):
    with pytest.raises(BadEnum):
        io.load_dataset(write(tmp_path, HEADER + "s,A,L,2,1,2,3\n"))


def test_inconsistent_width(tmp_path):
    with pytest.raises(InconsistentWidth) as exc:
        io.load_dataset(write(tmp_path, HEADER + "s,A,L,0,1,2\n"))
    assert exc.value.line == 2


@pytest.mark.parametrize("value", ["nan", "inf", "-inf", "abc"])
def test_non_finite_rejected(tmp_path, value):
    with pytest.raises(ParseError):
        io.load_dataset(write(tmp_path, HEADER + f"s,A,L,0,1,{value},3\n"))


@pytest.mark.parametrize("text", ["", "a,b,c\n", "dataset_id,subject_id,side,label\n",
                                  "dataset_id,subject_id,side,label,v0,v2\n"])
def test_bad_header(tmp_path, text):
    with pytest.raises(ParseError):
        io.load_dataset(write(tmp_path, text))


def test_aligned_range_checked(tmp_path):
    with pytest.raises(ParseError):
        io.load_aligned(write(tmp_path, HEADER + "s,A,L,0,0,2,1\n"))


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        io.load_dataset(tmp_path / "nope.csv")


# ---------------------------------------------------------------- checkpoints


@pytest.mark.parametrize("variant", list(Variant))
def test_checkpoint_exact(tmp_path, variant):
    rng = np.random.default_rng(5)
    bundle = build_bundle(rng, SMALL, variant)
    # awkward values: subnormals, signed zero, extremes
    bundle = bundle.with_vector(np.concatenate([[5e-324, -0.0, 1.7976931348623157e308, np.pi],
                                                bundle.ravel()[4:]]))
    io.save_checkpoint(bundle, tmp_path / "a.json", {"seed": 5})
    back = io.load_checkpoint(tmp_path / "a.json")
    assert back.variant is variant
    assert np.max(np.abs(back.ravel() - bundle.ravel())) == 0
    assert back.ravel().tobytes() == bundle.ravel().tobytes()
    io.save_checkpoint(back, tmp_path / "b.json", {"seed": 5})
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert io.load_checkpoint_metadata(tmp_path / "a.json") == {"seed": 5}


def test_checkpoint_schema_checked(tmp_path, ae_bundle):
    io.save_checkpoint(ae_bundle, tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    doc["schema_version"] += 1
    (tmp_path / "c.json").write_text(json.dumps(doc))
    with pytest.raises(SchemaMismatch):
        io.load_checkpoint(tmp_path / "c.json")
    doc["format"] = "other"
    with pytest.raises(SchemaMismatch):
        io.bundle_from_dict(doc)


# ---------------------------------------------------------------- tables and config


def test_trace_blank_for_nan(tmp_path):
    rows = [{"epoch": 1, "a": math.nan, "b": 0.5}]
    io.write_trace(rows, tmp_path / "t.csv", ["epoch", "a", "b"])
    assert (tmp_path / "t.csv").read_text() == "epoch,a,b\n1,,0.5\n"


def test_latent_and_table(tmp_path, ae_bundle, rng):
    from smeta.inference import extract_latent
    sigs = random_signals(rng, 2, 2)
    io.write_latents(extract_latent(ae_bundle, sigs), tmp_path / "z.csv", 4)
    lines = (tmp_path / "z.csv").read_text().splitlines()
    assert lines[0] == "subject_id,side,label,z0,z1,z2,z3" and len(lines) == 5
    io.write_table([{"x": 1, "y": None, "z": 0.1}], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == "x,y,z\n1,NA,0.1\n"


def test_read_config(tmp_path):
    p = write(tmp_path, "# comment\nalpha = 0.01\ninner-steps=3  # trailing\n\n", "c.txt")
    assert io.read_config(p) == {"alpha": "0.01", "inner_steps": "3"}
    with pytest.raises(ParseError):
        io.read_config(write(tmp_path, "alpha 0.01\n", "bad.txt"))
