"""Cores of dynamic cooperative games: fair, stable and credible allocation sequences."""

__version__ = "0.1.0"

from .credible_core import (Policy, PolicyAnalyzer, credible_core_check, one_deviation_check, policy_from_json,
                            theorem3_equivalence)
from .dynamics import (AllocationSequence, DiscountSpec, DynamicSpec, State, Trajectory, ValueOracle, simulate,
                       uniform_schedule)
from .errors import (BudgetError, ConfigurationError, DivergenceError, DyncoreError, InputError, PolicyError,
                     PreconditionError, SearchExhaustedError, SimulationError, SolverError)
from .fair_core import (ConvexCertificate, efficiency_check, efficient_fair_certificate_search,
                        fair_core_membership, search_fair_sequences, synthesize_fair_sequence,
                        theorem1_certificate_search)
from .families import load_spec, spec_from_json
from .game import Game, coalition, core_membership, format_coalition, game_from_json, least_core
from .market import MarketSpec, Utility, market_dynamic, random_market, stage_market_game
from .stable_core import (constant_worth_criterion, fixed_point, induced_game, stable_core_membership,
                          theorem2_experiment, window_find)
