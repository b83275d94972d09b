import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from isac_lab.array import ValidationError
from isac_lab.conic import Cone, embed_hermitian, project_cone, project_psd, project_soc, smat, svec, unembed_hermitian
from isac_lab.conic.cones import cone_distance

finite = st.floats(-10, 10, allow_nan=False)


def test_svec_example():
    S = np.array([[1.0, 2.0], [2.0, 3.0]])
    np.testing.assert_allclose(svec(S), [1.0, 2 * math.sqrt(2), 3.0])


def test_svec_preserves_inner_product():
    rng = np.random.default_rng(0)
    A, B = rng.standard_normal((2, 5, 5))
    A, B = A + A.T, B + B.T
    assert math.isclose(svec(A) @ svec(B), np.trace(A @ B), rel_tol=1e-12)


@given(arrays(float, (4, 4), elements=finite))
def test_svec_smat_roundtrip(M):
    S = M + M.T
    np.testing.assert_allclose(smat(svec(S)), S, atol=1e-12)


def test_project_soc_examples():
    np.testing.assert_allclose(project_soc(np.array([1.0, 0.5, 0.0])), [1.0, 0.5, 0.0])
    np.testing.assert_allclose(project_soc(np.array([-2.0, 1.0, 0.0])), [0, 0, 0])
    np.testing.assert_allclose(project_soc(np.array([0.0, 2.0, 0.0])), [1.0, 1.0, 0.0])


@given(arrays(float, 5, elements=finite))
def test_project_soc_idempotent_and_in_cone(v):
    p = project_soc(v)
    assert p[0] >= np.linalg.norm(p[1:]) - 1e-9
    np.testing.assert_allclose(project_soc(p), p, atol=1e-9)


@given(arrays(float, 5, elements=finite))
def test_moreau_decomposition_soc(v):
    # self-dual cone: v = P_K(v) - P_K(-v), with orthogonal parts
    p, q = project_soc(v), project_soc(-v)
    np.testing.assert_allclose(p - q, v, atol=1e-9)
    assert abs(p @ q) <= 1e-8 * (1 + v @ v)


def test_project_psd_example():
    np.testing.assert_allclose(project_psd(np.diag([2.0, -1.0])), np.diag([2.0, 0.0]))


@given(arrays(float, (4, 4), elements=finite))
def test_project_psd_properties(M):
    S = M + M.T
    P = project_psd(S)
    assert np.linalg.eigvalsh(P).min() >= -1e-9
    np.testing.assert_allclose(project_psd(P), P, atol=1e-8)
    np.testing.assert_allclose(P - project_psd(-S), S, atol=1e-8)


def test_project_cone_mixed_layout():
    cones = [Cone("zero", 2), Cone("nonneg", 2), Cone("soc", 3), Cone("psd", 2)]
    v = np.array([5.0, -1.0, -3.0, 2.0, 0.0, 2.0, 0.0, -1.0, 0.0, 2.0])
    p = project_cone(v, cones)
    np.testing.assert_allclose(p[:2], 0)
    np.testing.assert_allclose(p[2:4], [0, 2])
    np.testing.assert_allclose(p[4:7], [1, 1, 0])
    np.testing.assert_allclose(p[7:], [0, 0, 2])
    # the dual of the zero cone is everything
    np.testing.assert_allclose(project_cone(v, cones, dual=True)[:2], v[:2])
    assert cone_distance(p, cones) <= 1e-12


def test_cone_validation():
    with pytest.raises(ValidationError):
        Cone("exp", 3)
    with pytest.raises(ValidationError):
        Cone("soc", 0)
    assert Cone("psd", 3).dim == 6


@given(st.integers(0, 2 ** 31))
def test_hermitian_embedding(seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    H = G + G.conj().T
    E = embed_hermitian(H)
    np.testing.assert_allclose(unembed_hermitian(E), H, atol=1e-12)
    ev_h = np.linalg.eigvalsh(H)
    ev_e = np.linalg.eigvalsh(E)
    np.testing.assert_allclose(ev_e, np.sort(np.repeat(ev_h, 2)), atol=1e-9)
