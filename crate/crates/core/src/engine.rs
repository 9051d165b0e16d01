//! End-to-end alignment of one process execution against an accepting net.

use thiserror::Error;

use crate::alignment::{AlignmentGraph, Cost};
use crate::model::ProcessExecution;
use crate::oracle::{brute_force_optimal, OracleError, OracleLimits, OracleResult};
use crate::petri::{AcceptingNet, Binding};
use crate::product::{
    build_px_net, build_synchronous_product, expand_variable_arcs, generate_fresh_ids, ExpansionOptions,
    ProductError, RenamingMaps, SyncProductNet,
};
use crate::search::{bindings_to_alignment, search_optimal, ConversionError, SearchError, SearchLimits, SearchStats};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignOptions {
    pub expansion: ExpansionOptions,
    pub limits: SearchLimits,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Conversion(#[from] ConversionError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl AlignError {
    pub fn is_unalignable(&self) -> bool {
        matches!(self, AlignError::Search(SearchError::Unalignable { .. }))
    }

    pub fn is_resource_cap(&self) -> bool {
        match self {
            AlignError::Search(e) => e.is_resource_cap(),
            AlignError::Product(ProductError::ExpansionCap { .. }) => true,
            AlignError::Oracle(OracleError::StateCap(_)) => true,
            _ => false,
        }
    }

    pub fn stats(&self) -> Option<&SearchStats> {
        match self {
            AlignError::Search(e) => e.stats(),
            _ => None,
        }
    }
}

/// The nets an execution is aligned with.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub maps: RenamingMaps,
    pub px_net: AcceptingNet,
    /// The de-jure net after pre-processing for the execution's objects.
    pub dj_net: AcceptingNet,
    pub product: SyncProductNet,
}

pub fn prepare(px: &ProcessExecution, an: &AcceptingNet, opts: &ExpansionOptions) -> Result<Prepared, ProductError> {
    let maps = generate_fresh_ids(px, an);
    let px_net = build_px_net(px, &maps)?;
    let dj_net = expand_variable_arcs(an, &px.objects, opts)?;
    let product = build_synchronous_product(&px_net, &dj_net, &maps)?;
    Ok(Prepared {
        maps,
        px_net,
        dj_net,
        product,
    })
}

#[derive(Debug, Clone)]
pub struct Aligned {
    pub alignment: AlignmentGraph,
    pub bindings: Vec<Binding>,
    pub cost: Cost,
    pub stats: SearchStats,
}

pub fn align_prepared(px: &ProcessExecution, prepared: &Prepared, limits: &SearchLimits) -> Result<Aligned, AlignError> {
    let found = search_optimal(&prepared.product, limits)?;
    let alignment = bindings_to_alignment(&found.bindings, &prepared.product, px)?;
    Ok(Aligned {
        alignment,
        bindings: found.bindings,
        cost: found.cost,
        stats: found.stats,
    })
}

pub fn align_execution(px: &ProcessExecution, an: &AcceptingNet, opts: &AlignOptions) -> Result<Aligned, AlignError> {
    let prepared = prepare(px, an, &opts.expansion)?;
    align_prepared(px, &prepared, &opts.limits)
}

pub fn oracle_execution(
    px: &ProcessExecution,
    an: &AcceptingNet,
    expansion: &ExpansionOptions,
    limits: &OracleLimits,
) -> Result<(Prepared, OracleResult), AlignError> {
    let prepared = prepare(px, an, expansion)?;
    let result = brute_force_optimal(&prepared.product, limits)?;
    Ok((prepared, result))
}
