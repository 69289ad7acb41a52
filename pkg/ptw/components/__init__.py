from .builtin import BUILTIN_MODELS, builtin_model, with_tables
from .model import ModelSpec, Regularity, SamplePlan, StructureReport, check_structure
from .sections import (
    SECTIONS,
    HeaderSection,
    ModelSection,
    NumericsSection,
    SimulationSection,
    WaveSection,
)
from .types import CharacteristicRoots, DispersionCurve, EigenPair, SpeedPolar, SpeedResult

__all__ = [
    BUILTIN_MODELS,
    builtin_model,
    with_tables,
    ModelSpec,
    Regularity,
    SamplePlan,
    StructureReport,
    check_structure,
    SECTIONS,
    HeaderSection,
    ModelSection,
    NumericsSection,
    SimulationSection,
    WaveSection,
    CharacteristicRoots,
    DispersionCurve,
    EigenPair,
    SpeedPolar,
    SpeedResult,
]
