import numpy as np
import pytest

from pufguard import io as pio
from pufguard.learners import train, train_multiclass
from pufguard.puf import create_instance, generate_crps


@pytest.fixture
def crps():
    return generate_crps(create_instance("lw", 12, 3, seed=4), 50, 9)


def test_crp_round_trip(tmp_path, crps):
    path = tmp_path / "d.crp"
    pio.write_crps(crps, path)
    back = pio.read_crps(path)
    assert back == crps
    lines = path.read_bytes().split(b"\n")
    assert lines[0] == b"pufcrp v1 arch=lw stages=12 k=3 count=50 seed=9"
    assert b"\r" not in path.read_bytes()


def test_crp_round_trip_reevaluates(tmp_path, crps):
    path = tmp_path / "d.crp"
    pio.write_crps(crps, path)
    back = pio.read_crps(path)
    inst = create_instance(back.arch, back.stages, back.k, seed=4)
    assert np.array_equal(inst.eval(back.challenges), back.responses)


def test_crp_count_mismatch_names_discrepancy(tmp_path, crps):
    path = tmp_path / "d.crp"
    pio.write_crps(crps, path)
    text = path.read_text().splitlines()
    path.write_text("\n".join(text[:20]) + "\n")
    with pytest.raises(pio.FormatError, match="count=50 but the file has 19") as err:
        pio.read_crps(path)
    assert err.value.line is not None


@pytest.mark.parametrize("body,lineno", [("0101 +1\n01x1 -1\n", 3), ("0101 +1\n0101 0\n", 3), ("010 +1\n0101 -1\n", 2)])
def test_crp_bad_lines_report_line(tmp_path, body, lineno):
    path = tmp_path / "bad.crp"
    path.write_text("pufcrp v1 arch=arbiter stages=4 k=1 count=2 seed=0\n" + body)
    with pytest.raises(pio.FormatError) as err:
        pio.read_crps(path)
    assert err.value.line == lineno


def test_crp_bad_header(tmp_path):
    path = tmp_path / "bad.crp"
    path.write_text("pufcrp v2 arch=arbiter\n")
    with pytest.raises(pio.FormatError):
        pio.read_crps(path)
    path.write_text("pufcrp v1 arch=arbiter stages=4 k=1 seed=0\n")
    with pytest.raises(pio.FormatError, match="count"):
        pio.read_crps(path)
    path.write_bytes(b"pufcrp v1 arch=arbiter stages=4 k=1 count=0 seed=0\r\n")
    with pytest.raises(pio.FormatError):
        pio.read_crps(path)


def _fit(kind, multiclass=False):
    rng = np.random.default_rng(0)
    X = rng.choice([-1.0, 1.0], (120, 6))
    hyper = {"rf": {"n_estimators": 5}, "nn": {"max_epochs": 20}}.get(kind)
    if multiclass:
        y = (X[:, 0] > 0).astype(int) + (X[:, 1] > 0).astype(int)
        return train_multiclass(X, y, kind, hyper), X
    return train(kind, X, np.where(X[:, 0] * X[:, 1] > 0, 1, -1), hyper), X


@pytest.mark.parametrize("kind", ["lr", "rf", "nn"])
@pytest.mark.parametrize("multiclass", [False, True])
def test_model_round_trip_exact(tmp_path, kind, multiclass):
    model, X = _fit(kind, multiclass)
    path = tmp_path / "m.txt"
    pio.save_model(model, path, "parity")
    back, encoding = pio.load_model(path)
    assert encoding == "parity"
    assert type(back) is type(model)
    assert np.array_equal(back.predict_proba(X), model.predict_proba(X))
    assert np.array_equal(back.classes_, model.classes_)
    pio.save_model(back, tmp_path / "again.txt", "parity")
    assert (tmp_path / "again.txt").read_bytes() == path.read_bytes()


def test_model_header(tmp_path):
    model, _ = _fit("lr")
    lines = pio.format_model(model)
    assert lines[0] == "pufmodel v1 kind=lr dim=6 classes=-1,1"
    assert lines[1].startswith("weights ")


def test_model_truncated(tmp_path):
    model, _ = _fit("nn")
    lines = pio.format_model(model)
    with pytest.raises(pio.FormatError):
        pio.parse_model(lines[:-2])
    with pytest.raises(pio.FormatError):
        pio.parse_model(lines + ["extra"])


def test_fmt_real_round_trips():
    for x in [0.1, 1 / 3, -2.5e-300, 1e300, np.pi]:
        assert float(pio.fmt_real(x)) == x


def test_disc_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    V = rng.choice([-1, 1], (6, 5)).astype(np.int8)
    y = np.array([1, -1, 1, -1, 1, -1])
    path = tmp_path / "d.disc"
    pio.write_disc(V, y, path)
    assert path.read_text().splitlines()[0] == "pufdisc v1 width=5 count=6"
    V2, y2 = pio.read_disc(path)
    assert np.array_equal(V, V2) and np.array_equal(y, y2)


def test_disc_bad_line(tmp_path):
    path = tmp_path / "d.disc"
    path.write_text("pufdisc v1 width=2 count=2\n+1,-1 authentic\n+1,+1,+1 cloned\n")
    with pytest.raises(pio.FormatError) as err:
        pio.read_disc(path)
    assert err.value.line == 3
