"""Log-width two-body QUBO solver: circuit pseudo-moments, SA(2) repair, MaxEnt Gibbs decoding."""
from ._jit import USE_NUMBA, backend_name
from .circuit import CircuitConfig, CircuitState, born_probabilities, prepare_state
from .decoder import (IsingModel, SampleBatch, best_bitstring, fit_maxent_ising, gibbs_sample,
                      robust_ising_from_qubo)
from .instance import (Graph, GsetParseError, QuboInstance, cut_value, generate_er, maxcut_to_qubo,
                       parse_gset, qubo_energy_bits, serialize_gset)
from .moments import PseudoMoments, accumulate_moments
from .sa2 import FeasibleMoments, IpfReport, bf_interval, ipf_project, kl_gap, pairwise_table, violation_mass
from .train import (KlRampSchedule, LrSchedule, RunRecord, TrainConfig, gradient, lambda_kl,
                    learning_rate, loss, train)

__version__ = "0.1.0"
