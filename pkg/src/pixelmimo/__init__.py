"""Capacity optimization for MIMO links with pixel (switch-reconfigurable) antennas."""

from .channel import (ChannelConfig, CoderAssignment, EffectiveChannel,
                      VirtualChannel, WaterFillResult, effective_channel,
                      pattern_matrix, rate, sample_virtual_channel, water_fill)
from .network import (AntennaModel, load_impedance, pixel_currents,
                      radiation_pattern, read_antenna_model,
                      synthesize_antenna_model, write_antenna_model)
from .solvers import Problem, RateSolution, solve

__all__ = ['AntennaModel', 'ChannelConfig', 'CoderAssignment', 'EffectiveChannel',
           'Problem', 'RateSolution', 'VirtualChannel', 'WaterFillResult',
           'effective_channel', 'load_impedance', 'pattern_matrix', 'pixel_currents',
           'radiation_pattern', 'rate', 'read_antenna_model', 'sample_virtual_channel',
           'solve', 'synthesize_antenna_model', 'water_fill', 'write_antenna_model']

__version__ = '0.1.0'
