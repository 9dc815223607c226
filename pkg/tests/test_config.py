import pytest

from accdngd.config import emit_config, load_config, parse_config
from accdngd.exceptions import ParseError, ValidationError

MINIMAL = """\
[experiment]
iterations = 1000

[graph]
spec = grid2d:5x5

[objective]
case = case1

[algorithm:acc]
preset = fig1_grid_acc_dngd_sc
"""


def test_minimal():
    c = parse_config(MINIMAL)
    assert c.iterations == 1000 and c.graph == "grid2d:5x5" and c.case == "case1"
    assert c.record_every == 1 and c.seed == 0 and not c.time_varying
    (a,) = c.algorithms
    assert a.label == "acc" and a.method == "acc_dngd_sc" and a.step_source == "preset"
    assert c.effective_burn_in() == 100


def test_preset_resolution():
    from accdngd.presets import get_preset

    c = parse_config(MINIMAL.replace("fig1_grid_acc_dngd_sc", "fig1_random_acc_dngd_sc"))
    p = get_preset(c.algorithms[0].preset)
    assert (p.eta, p.alpha) == (0.00017, 0.011821)


def test_beta_out_of_range():
    text = MINIMAL.replace("preset = fig1_grid_acc_dngd_sc", "method = acc_dngd_nsc\neta_times_L = 0.5\nbeta = 2.5")
    with pytest.raises(ValidationError) as ei:
        parse_config(text)
    assert ei.value.path == "algorithm:acc.beta"


def test_unknown_key_has_line():
    with pytest.raises(ParseError) as ei:
        parse_config(MINIMAL.replace("iterations = 1000", "iterations = 1000\nwarp = 9"))
    assert ei.value.line == 3 and ei.value.field == "warp"


@pytest.mark.parametrize("text,exc", [
    ("iterations = 3\n", ParseError),
    (MINIMAL + "[bogus]\nx = 1\n", ParseError),
    (MINIMAL.replace("1000", "ten"), ParseError),
    (MINIMAL.replace("1000", "0"), ValidationError),
    (MINIMAL.replace("1000", "nan"), ParseError),
    (MINIMAL.replace("[experiment]\niterations = 1000\n", "[experiment]\n"), ValidationError),
    (MINIMAL.replace("case1", "case9"), ValidationError),
    (MINIMAL.replace("preset = fig1_grid_acc_dngd_sc", "method = acc_dngd_sc"), ValidationError),
    (MINIMAL.replace("preset = fig1_grid_acc_dngd_sc", "preset = nope"), ValidationError),
    (MINIMAL.replace("preset = fig1_grid_acc_dngd_sc", "method = extra\npreset = fig1_grid_acc_dngd_sc"),
     ValidationError),
    (MINIMAL.replace("preset = fig1_grid_acc_dngd_sc", "method = extra\neta = 1\neta_times_L = 1"),
     ValidationError),
    (MINIMAL.replace("preset = fig1_grid_acc_dngd_sc", "method = extra\neta = -1"), ValidationError),
    (MINIMAL.replace("preset = fig1_grid_acc_dngd_sc", "method = extra\nbound_fraction = 0.5"), ValidationError),
    (MINIMAL.replace("[algorithm:acc]\npreset = fig1_grid_acc_dngd_sc\n", ""), ValidationError),
    (MINIMAL + "[time_varying]\nremove_fraction = 1.5\n", ValidationError),
    (MINIMAL.replace("iterations = 1000", "iterations = 1000\niterations = 5"), ParseError),
])
def test_rejections(text, exc):
    with pytest.raises(exc):
        parse_config(text)


def test_duplicate_key_line():
    with pytest.raises(ParseError) as ei:
        parse_config(MINIMAL.replace("iterations = 1000", "iterations = 1000\niterations = 5"))
    assert ei.value.line == 3


def test_round_trip_fixed_point():
    text = """\
[experiment]
iterations = 300
record_every = 7
seed = 11
burn_in = 40
init_sd = 2.5
output = out/x

[graph]
spec = er:20,0.3
weights = metropolis

[objective]
case = case3
seed = 4
dim = 4

[time_varying]
remove_fraction = 0.75

[algorithm:van]
method = acc_dngd_nsc
eta_times_L = 0.5
beta = 0.61   ; vanishing
init_mode = exact

[algorithm:cn]
method = cngd_nsc
eta = 1e-3
alpha0 = 0.4
"""
    c = parse_config(text)
    once = emit_config(c)
    assert parse_config(once) == c
    assert emit_config(parse_config(once)) == once
    assert c.algorithms[0].beta == 0.61 and c.time_varying and c.burn_in == 40


def test_constants_section_ignored_and_seed_override(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(MINIMAL + "\n[constants]\nsigma = 0.9\n")
    c = load_config(p)
    assert c == parse_config(MINIMAL)
    assert c.with_seed(5).seed == 5 and c.with_seed(5).algorithms == c.algorithms
