"""Numerical laboratory for trilinear multiplier operators with flag-product
symbols: spectral evaluation, constructive decompositions verified as exact
discrete identities, dyadic model operators, size/energy stopping times, and
restricted-weak-type experiments on a sampled torus."""

from .dyadic import (
    BumpFamily,
    CoefficientFamily,
    DyadicInterval,
    FrequencyBand,
    ModelConfig,
    ParaproductReport,
    apply_T1,
    apply_T1_k0,
    apply_T2,
    apply_T2_k0,
    inner_paraproduct,
    inner_paraproduct_k0,
    ladder_intervals,
    lambda1_coefficients,
    lambda1_form,
    lambda1_value,
    make_family,
    model_index_pairs,
    random_coefficient_family,
    scale_class,
    standard_config,
)
from .decomposition import (
    CoefficientTable,
    DecompositionWindows,
    IdentityReport,
    PartitionReport,
    SplitSymbols,
    TaylorSplit,
    build_partition,
    fourier_coefficients,
    l1_bump,
    split_product,
    taylor_split,
    verify_calc1,
    verify_calc2,
    verify_calc3,
    window_profile,
)
from .grid import (
    SampledFunction,
    Spectrum,
    TorusGrid,
    approx_cutoff,
    bandwidth,
    convolve,
    dft,
    idft,
    lp_norm,
    maximal_function,
    pair,
    pair_conj,
    pure_mode,
    random_bandlimited,
    weak_l1_norm,
)
from .multilinear import (
    FormValue,
    TrilinearResult,
    adjoint_form,
    apply_flag_separable,
    apply_trilinear_naive,
    check_bandwidth_budget,
    flag_form,
    four_form,
)
from .size_energy import (
    InequalityReport,
    PartitionLevel,
    SizeEnergyParams,
    Tree,
    TreeDecomposition,
    abstract_estimate_check,
    energy,
    energy_bounds_check,
    full_partition,
    john_nirenberg_compare,
    local_embedding_check,
    size,
    size_bounds_check,
    stopping_decomposition,
)
from .symbols import (
    MihlinReport,
    SymbolSpec,
    eval_symbol,
    eval_symbol_continuous,
    eval_symbol_grid,
    flag_symbol,
    mihlin_check,
    standard_symbols,
    tabulate,
    trivial_symbol,
)

__all__ = [
    "BumpFamily",
    "CoefficientFamily",
    "CoefficientTable",
    "DecompositionWindows",
    "DyadicInterval",
    "FormValue",
    "FrequencyBand",
    "IdentityReport",
    "InequalityReport",
    "MihlinReport",
    "ModelConfig",
    "ParaproductReport",
    "PartitionLevel",
    "PartitionReport",
    "SampledFunction",
    "SizeEnergyParams",
    "Spectrum",
    "SplitSymbols",
    "SymbolSpec",
    "TaylorSplit",
    "TorusGrid",
    "Tree",
    "TreeDecomposition",
    "TrilinearResult",
    "abstract_estimate_check",
    "adjoint_form",
    "apply_T1",
    "apply_T1_k0",
    "apply_T2",
    "apply_T2_k0",
    "apply_flag_separable",
    "apply_trilinear_naive",
    "approx_cutoff",
    "bandwidth",
    "build_partition",
    "check_bandwidth_budget",
    "convolve",
    "dft",
    "energy",
    "energy_bounds_check",
    "eval_symbol",
    "eval_symbol_continuous",
    "eval_symbol_grid",
    "flag_form",
    "flag_symbol",
    "four_form",
    "fourier_coefficients",
    "full_partition",
    "idft",
    "inner_paraproduct",
    "inner_paraproduct_k0",
    "john_nirenberg_compare",
    "l1_bump",
    "ladder_intervals",
    "lambda1_coefficients",
    "lambda1_form",
    "lambda1_value",
    "local_embedding_check",
    "lp_norm",
    "make_family",
    "maximal_function",
    "mihlin_check",
    "model_index_pairs",
    "pair",
    "pair_conj",
    "pure_mode",
    "random_bandlimited",
    "random_coefficient_family",
    "scale_class",
    "size",
    "size_bounds_check",
    "split_product",
    "standard_config",
    "standard_symbols",
    "stopping_decomposition",
    "tabulate",
    "taylor_split",
    "trivial_symbol",
    "verify_calc1",
    "verify_calc2",
    "verify_calc3",
    "weak_l1_norm",
    "window_profile",
]
