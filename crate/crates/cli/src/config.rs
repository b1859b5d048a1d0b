//! Instance configuration: JSON in, validated FormsContext out.

use std::sync::Arc;

use serde::Deserialize;

use oddform_core::formparam::{FormParameter, FormRing, HPoint, PointSet};
use oddform_core::rings::{
    build_ring_capped, make_odd_quadruple, standard_involution, Elem, FiniteRing, Involution,
    InvolutionName, RingSpec, DEFAULT_CARRIER_CAP,
};
use oddform_core::unitary::{classical_instance, ClassicalKind, FormsContext};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    /// Either a full ring/involution description or a classical shortcut.
    #[serde(default)]
    pub ring: Option<RingSpec>,
    #[serde(default)]
    pub involution: Option<InvolutionSpec>,
    #[serde(default)]
    pub lambda: Option<ElemRef>,
    #[serde(default)]
    pub mu: Option<ElemRef>,
    #[serde(default)]
    pub delta: Option<DeltaSpec>,
    #[serde(default)]
    pub classical: Option<ClassicalKind>,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InvolutionSpec {
    Named(InvolutionName),
    Table { table: Vec<Elem> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ElemRef {
    Named(String),
    Index(Elem),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    Named(String),
    Points { points: Vec<(Elem, Elem)> },
}

impl ElemRef {
    fn resolve(&self, ring: &FiniteRing) -> Result<Elem, String> {
        match self {
            ElemRef::Index(i) => {
                if *i < ring.size() {
                    Ok(*i)
                } else {
                    Err(format!("element index {i} out of range"))
                }
            }
            ElemRef::Named(name) => match name.as_str() {
                "zero" => Ok(ring.zero()),
                "one" => Ok(ring.one()),
                "minus_one" => Ok(ring.neg(ring.one())),
                "two" => Ok(ring.add(ring.one(), ring.one())),
                other => Err(format!("unknown element name `{other}`")),
            },
        }
    }
}

pub fn build_context(cfg: &InstanceConfig, cap: u64) -> Result<FormsContext, String> {
    if let Some(kind) = &cfg.classical {
        return classical_instance(kind, cfg.n).map_err(|e| e.to_string());
    }
    let spec = cfg.ring.as_ref().ok_or("config needs either `ring` or `classical`")?;
    // --cap bounds closures and enumerations; the carrier guard keeps its
    // own default and is only lifted by a larger --cap
    let ring = build_ring_capped(spec, cap.max(DEFAULT_CARRIER_CAP)).map_err(|e| e.to_string())?;
    let bar = match cfg.involution.as_ref().ok_or("missing `involution`")? {
        InvolutionSpec::Named(name) => {
            standard_involution(&ring, *name).map_err(|e| e.to_string())?
        }
        InvolutionSpec::Table { table } => {
            Involution::new(ring.clone(), table.clone()).map_err(|e| e.to_string())?
        }
    };
    let lambda = cfg
        .lambda
        .as_ref()
        .unwrap_or(&ElemRef::Named("one".into()))
        .resolve(&ring)?;
    let mu =
        cfg.mu.as_ref().unwrap_or(&ElemRef::Named("zero".into())).resolve(&ring)?;
    let quad = make_odd_quadruple(Arc::new(bar), lambda, mu).map_err(|e| e.to_string())?;
    let delta = match cfg.delta.as_ref().unwrap_or(&DeltaSpec::Named("max".into())) {
        DeltaSpec::Named(name) => match name.as_str() {
            "max" => FormParameter::max(&quad),
            "min" => FormParameter::min(&quad),
            other => return Err(format!("unknown delta name `{other}`")),
        },
        DeltaSpec::Points { points } => {
            let set = PointSet::from_points(
                ring.size(),
                points.iter().map(|&(x, y)| HPoint::new(x, y)),
            );
            FormParameter::certify(&quad, set).map_err(|e| e.to_string())?
        }
    };
    FormsContext::new(FormRing::new(quad, delta), cfg.n).map_err(|e| e.to_string())
}
