"""One test per acceptance criterion, at the stated tolerances.

Each result line is echoed as it finishes and collected into a summary
block at the end of the session.
"""
import pytest

from eigentask import acceptance as acc

from conftest import ACCEPTANCE_LINES


def _run(check, capsys):
    res = check()
    ACCEPTANCE_LINES.append(res.line())
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.to_json()


def test_golden_values(capsys):
    _run(acc.check_golden, capsys)


def test_1_two_design_spectrum(capsys):
    _run(acc.check_two_design, capsys)


def test_2_rec_identity(capsys):
    _run(acc.check_rec_identity, capsys)


def test_3_eigentask_orthogonality(capsys):
    _run(acc.check_orthogonality, capsys)


def test_4_finite_shot_correction(capsys):
    _run(acc.check_finite_shot_correction, capsys)


def test_5_gram_free_route(capsys):
    _run(acc.check_gram_free, capsys)


def test_6_function_capacity(capsys):
    _run(acc.check_function_capacity, capsys)


def test_7_noise_statistics(capsys):
    _run(acc.check_noise_statistics, capsys)


def test_8_total_correlation(capsys):
    _run(acc.check_total_correlation, capsys)


@pytest.mark.slow
def test_9_overfitting_beyond_cutoff(capsys):
    _run(acc.check_overfitting, capsys)


def test_10_loss_expansion(capsys):
    _run(acc.check_loss_expansion, capsys)


def test_11_monotone_rec(capsys):
    _run(acc.check_monotone_rec, capsys)
