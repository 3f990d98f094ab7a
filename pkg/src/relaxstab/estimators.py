"""scikit-learn style wrappers around the functional API.

The estimators hold only hyper-parameters in ``__init__`` (so
``get_params``/``set_params``/``clone`` work) and expose fitted results as
trailing-underscore attributes.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from ._validation import as_square, check_states
from .boundary import face_eigenstructure, reconstruct, split_state
from .solver import SchemeConfig, fit_decay, run
from .stability import RectDomain, RelaxationSystem, certify


def _as_system(X, r=None):
    if isinstance(X, RelaxationSystem):
        return X
    if isinstance(X, dict):
        return RelaxationSystem(X["A1"], X["A2"], X["e"])
    raise TypeError("expected a RelaxationSystem or a dict with keys A1, A2, e")


class StabilityCertifier(BaseEstimator):
    """Certify boundary stabilizability of a relaxation system on a rectangle.

    Parameters
    ----------
    A0 : array-like of shape (N, N)
        Candidate symmetrizer in normalized coordinates.
    domain : tuple of 4 floats, default=(0, 1, 0, 1)
        ``(x_min, x_max, y_min, y_max)``.
    r : int or None
        Relaxed dimension; required when fitting a raw system.
    """

    def __init__(self, A0=None, domain=(0.0, 1.0, 0.0, 1.0), r=None):
        self.A0 = A0
        self.domain = domain
        self.r = r

    def fit(self, X, y=None):
        """``X`` is a :class:`RawSystem`, :class:`RelaxationSystem` or matrix dict."""
        domain = RectDomain(*self.domain)
        if isinstance(X, (RelaxationSystem, dict)):
            system = _as_system(X)
            r = system.r if self.r is None else self.r
        else:
            system, r = X, self.r
            if r is None:
                raise ValueError("r is required to normalize a raw system")
        self.certificate_ = certify(system, r, self.A0, domain)
        cert = self.certificate_
        self.alpha_, self.beta_ = cert.alpha, cert.beta
        self.chi_, self.K_ = cert.chi, cert.K
        self.sigma_, self.nu_ = cert.sigma, cert.nu
        return self

    def lyapunov(self, state):
        """Weighted functional of a :class:`GridState` under the fitted weight."""
        check_is_fitted(self, "certificate_")
        return state.lyapunov(self.certificate_.weight, self.certificate_.A0)


class CharacteristicSplitter(TransformerMixin, BaseEstimator):
    """Map states to characteristic variables ``zeta = P^-1 U`` at a boundary normal.

    ``transform`` returns ``(zeta_+, zeta_0, zeta_-)`` concatenated in that
    order; ``inverse_transform`` reconstructs ``U``.
    """

    def __init__(self, normal=(1.0, 0.0), A0=None):
        self.normal = normal
        self.A0 = A0

    def fit(self, X, y=None):
        system = _as_system(X)
        A0 = np.eye(system.N) if self.A0 is None else as_square(self.A0, "A0", system.N)
        self.face_ = face_eigenstructure(system, A0, self.normal)
        self.n_features_in_ = system.N
        self.n_plus_, self.n_minus_ = self.face_.p, self.face_.n
        return self

    def transform(self, X):
        check_is_fitted(self, "face_")
        U = check_states(X, self.n_features_in_, "X")
        return split_state(self.face_, U).concat()

    def inverse_transform(self, X):
        check_is_fitted(self, "face_")
        Z = check_states(X, self.n_features_in_, "X")
        return reconstruct(self.face_, Z)


class DecayRateEstimator(RegressorMixin, BaseEstimator):
    """Fit ``L(t) ~ C exp(-rate t)`` to a positive series.

    ``fit(t, L)`` takes times of shape (n,) or (n, 1); ``predict`` returns the
    fitted exponential.
    """

    def __init__(self, transient=0.1):
        self.transient = transient

    def fit(self, X, y):
        X, y = check_X_y(np.asarray(X, float).reshape(-1, 1), y, y_numeric=True)
        res = fit_decay(X[:, 0], y, self.transient)
        self.rate_, self.intercept_, self.residual_ = res.rate, res.intercept, res.residual
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "rate_")
        t = np.asarray(X, float).reshape(-1)
        return np.exp(self.intercept_ - self.rate_ * t)


class RelaxationSimulator(BaseEstimator):
    """Run the upwind solver from an initial grid passed to ``fit``.

    Parameters
    ----------
    system : RelaxationSystem
    A0 : array-like
    laws : list of ControlLaw
    certificate : StabilityCertificate or None
    domain : tuple of 4 floats
    cfl, t_end, source_mode, record_every : see :class:`SchemeConfig`.
    """

    def __init__(self, system=None, A0=None, laws=None, certificate=None,
                 domain=(0.0, 1.0, 0.0, 1.0), cfl=0.9, t_end=1.0,
                 source_mode="exact-exponential", record_every=1):
        self.system = system
        self.A0 = A0
        self.laws = laws
        self.certificate = certificate
        self.domain = domain
        self.cfl = cfl
        self.t_end = t_end
        self.source_mode = source_mode
        self.record_every = record_every

    def fit(self, X, y=None):
        U0 = np.asarray(X, float)
        if U0.ndim != 3:
            raise ValueError(f"initial grid must have shape (nx, ny, N), got {U0.shape}")
        scheme = SchemeConfig(self.cfl, self.t_end, self.source_mode, self.record_every)
        self.report_ = run(self.system, self.A0, self.certificate, self.laws or [],
                           RectDomain(*self.domain), U0, scheme)
        self.rate_ = self.report_.fitted_rate
        return self

    def predict(self, X=None):
        """Final grid of the fitted run."""
        check_is_fitted(self, "report_")
        return self.report_.final.U
