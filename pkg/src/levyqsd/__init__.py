"""Scale functions and quasi-stationary distributions of spectrally positive Lévy processes."""
from .levy import (BMDrift, CPExpDrift, DomainError, LevyModel, Meromorphic, ModelError,
                   ValidationReport, esscher, psi, psi_derivative, validate)
from .montecarlo import (ConditionalLaw, ExitSamples, SimConfig, TooFewSurvivors, conditional_law,
                         estimate_exit_laplace, estimate_survival, simulate_exit, yaglom_estimate)
from .qsd import (NormalizationError, OrderVerdict, QsdDensity, ScanRow, build_qsd, lambda_scan,
                  order_check, qsd_laplace, qsd_sample)
from .scale import (ConvergenceError, Method, ScaleGrid, StepSizeError, grid_laplace,
                    laplace_residual, meromorphic_roots, potential_density, scale_closed_form,
                    scale_expansion, scale_grid, scale_renewal, scale_series, w_phi)
from .spectral import SpectralData, compute_spectral, phi, phi_extended, phi_prime

__version__ = "0.1.0"
