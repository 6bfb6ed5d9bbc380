import numpy as np
import pytest

from sipsolve.errors import InputError
from sipsolve.instances import random_affine_instance
from sipsolve.lower_level import CertifiedMax, certified_max, strongest_violator
from sipsolve.problem import BoxDomain, ConstraintFamily


class TestCertifiedMax:
    def test_instance_a_midpoint(self, prob_a):
        cm = certified_max(prob_a.constraints[0], np.array([0.5]), 1e-6)
        assert cm.gap <= 1e-6
        assert abs(cm.y_star[0] - 1.0) <= 2e-6
        assert abs(cm.value - 0.5) <= 2e-6
        # the certificate covers the true supremum
        assert cm.value + cm.gap >= 0.5 - 1e-12

    def test_instance_a_negative(self, prob_a):
        cm = certified_max(prob_a.constraints[0], np.array([-0.1]), 1e-6)
        assert abs(cm.value - (-0.1)) <= 2e-6

    def test_instance_b(self, prob_b):
        # g((0,-2), y) = 2y - 1, maximum 1 at y = 1 (brute-checked in conftest)
        from conftest import grid_max_y

        cm = certified_max(prob_b.constraints[0], np.array([0.0, -2.0]), 1e-6)
        brute, _ = grid_max_y(prob_b.constraints[0], [0.0, -2.0], n=4001)
        assert cm.value + cm.gap >= brute - 1e-12
        assert abs(cm.value - 1.0) <= 2e-6

    def test_gap_never_exceeds_request(self, prob_a):
        for delta in (1e-2, 1e-4, 1e-8):
            cm = certified_max(prob_a.constraints[0], np.array([0.3]), delta)
            assert 0.0 <= cm.gap <= delta

    def test_value_is_exact_reevaluation(self, prob_b):
        cm = certified_max(prob_b.constraints[0], np.array([1.0, -2.0]), 1e-5)
        assert cm.value == prob_b.constraints[0].value(
            np.array([1.0, -2.0]), cm.y_star
        )

    def test_deterministic(self, prob_b):
        a = certified_max(prob_b.constraints[0], np.array([0.7, -1.3]), 1e-7)
        b = certified_max(prob_b.constraints[0], np.array([0.7, -1.3]), 1e-7)
        assert np.array_equal(a.y_star, b.y_star)
        assert a.value == b.value and a.gap == b.gap and a.evals == b.evals

    def test_rejects_nonpositive_delta(self, prob_a):
        with pytest.raises(InputError):
            certified_max(prob_a.constraints[0], np.array([0.0]), 0.0)

    def test_constant_family_single_eval(self, prob_sibling):
        cm = certified_max(prob_sibling.constraints[0], np.array([0.5]), 1e-9)
        assert cm.gap == 0.0
        assert cm.value == pytest.approx(-0.75)
        assert cm.evals == 1

    def test_degenerate_box(self):
        fam = ConstraintFamily(
            index=0,
            value=lambda x, y: float(x[0] * y[0]),
            subgradient_x=lambda x, y: np.array([y[0]]),
            lipschitz_in_y=2.0,
            y_domain=BoxDomain([0.5], [0.5]),
        )
        cm = certified_max(fam, np.array([2.0]), 1e-9)
        assert cm.value == pytest.approx(1.0)
        assert cm.gap <= 1e-9

    def test_certificate_against_finer_grid_random(self):
        # soundness on random polynomial families: value + delta covers the
        # max over a grid 10x finer than the certificate resolution
        for seed in range(30):
            prob = random_affine_instance(seed)
            fam = prob.constraints[0]
            q = fam.y_domain.dim
            delta = 1e-3 if q == 1 else 0.05
            x = prob.x_domain.center() + 0.1 * prob.x_domain.widths
            x = prob.x_domain.clip(x)
            cm = certified_max(fam, x, delta)
            lip = max(fam.local_lipschitz_in_y(x), 1e-9)
            res = delta / lip / 10.0
            width = float(np.max(fam.y_domain.widths))
            res = max(res, width / 2000 if q == 1 else width / 400)
            ys = fam.y_domain.grid(res)
            finer = float(np.max(fam.eval_grid(x, ys)))
            assert cm.value + delta >= finer - 1e-12, seed


class TestPluggableMaximizer:
    def test_custom_maximizer_is_used_and_checked(self, prob_a):
        base = prob_a.constraints[0]

        def exact_max(x, delta):
            y = np.array([1.0])
            return CertifiedMax(y_star=y, value=float(base.value(x, y)), gap=0.0)

        fam = ConstraintFamily(
            index=0,
            value=base.value,
            subgradient_x=base.subgradient_x,
            lipschitz_in_y=1.0,
            y_domain=base.y_domain,
            custom_maximizer=exact_max,
        )
        cm = certified_max(fam, np.array([0.5]), 1e-9)
        assert cm.value == 0.5 and cm.gap == 0.0

    def test_custom_maximizer_bad_gap_rejected(self, prob_a):
        base = prob_a.constraints[0]
        fam = ConstraintFamily(
            index=0,
            value=base.value,
            subgradient_x=base.subgradient_x,
            lipschitz_in_y=1.0,
            y_domain=base.y_domain,
            custom_maximizer=lambda x, d: CertifiedMax(
                y_star=np.array([1.0]), value=float(base.value(x, [1.0])), gap=1.0
            ),
        )
        with pytest.raises(InputError):
            certified_max(fam, np.array([0.5]), 1e-9)


class TestStrongestViolator:
    def _cm(self, v):
        return CertifiedMax(y_star=np.array([0.0]), value=v, gap=0.0)

    def test_argmax(self):
        i, cm = strongest_violator({1: self._cm(0.5), 2: self._cm(-0.3)})
        assert i == 1 and cm.value == 0.5

    def test_tie_smallest_index(self):
        i, _ = strongest_violator({2: self._cm(0.2), 1: self._cm(0.2)})
        assert i == 1

    def test_singleton(self):
        i, cm = strongest_violator({1: self._cm(-1.0)})
        assert i == 1 and cm.value == -1.0

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            strongest_violator({})
