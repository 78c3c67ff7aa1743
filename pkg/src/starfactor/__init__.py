"""3-star factors in random d-regular graphs under the pairing model"""
from starfactor.cycle_census import CycleCensus, census, census_trace_check
from starfactor.errors import (ConfigurationError, GraphError, PairingError, RegionError, SizeExplosionError,
                               StarFactorError, VerificationError)
from starfactor.factor_count import count_3star_factors, has_3star_factor, oracle_count
from starfactor.pairing import (MultiGraph, Pairing, PairingSpace, enumerate_all, is_simple, matchings_count,
                                project, sample_uniform)

__version__ = '0.1.0'
