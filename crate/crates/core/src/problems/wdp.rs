//! Winner determination as weighted set packing.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Assignment, ConstraintKind, ConstraintTag, LinearExpr, MilpModel, ModelError, Relation, Sense,
    TaggedConstraint, VarId,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WdpError {
    #[error("bid {bid} references good {good}, instance has {goods} goods")]
    UnknownGood { bid: u32, good: usize, goods: usize },
    #[error("bid {0} has an empty bundle")]
    EmptyBundle(u32),
    #[error("bid {0} has a negative or non-finite price")]
    InvalidPrice(u32),
    #[error("duplicate bid id {0}")]
    DuplicateBid(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub id: u32,
    pub goods: Vec<usize>,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdpInstance {
    pub goods: usize,
    pub bids: Vec<Bid>,
}

impl WdpInstance {
    pub fn validate(&self) -> Result<(), WdpError> {
        let mut seen = BTreeSet::new();
        for b in &self.bids {
            if !seen.insert(b.id) {
                return Err(WdpError::DuplicateBid(b.id));
            }
            if b.goods.is_empty() {
                return Err(WdpError::EmptyBundle(b.id));
            }
            if !(b.price.is_finite() && b.price >= 0.0) {
                return Err(WdpError::InvalidPrice(b.id));
            }
            if let Some(&g) = b.goods.iter().find(|&&g| g >= self.goods) {
                return Err(WdpError::UnknownGood {
                    bid: b.id,
                    good: g,
                    goods: self.goods,
                });
            }
        }
        Ok(())
    }

    pub fn bid(&self, id: u32) -> Option<&Bid> {
        self.bids.iter().find(|b| b.id == id)
    }

    pub fn bids_on(&self, good: usize) -> Vec<u32> {
        self.bids
            .iter()
            .filter(|b| b.goods.contains(&good))
            .map(|b| b.id)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct WdpModel {
    pub instance: WdpInstance,
    pub model: MilpModel,
    /// Variable of each bid, in bid order.
    pub vars: Vec<VarId>,
}

impl WdpModel {
    pub fn var(&self, bid: u32) -> Option<VarId> {
        let i = self.instance.bids.iter().position(|b| b.id == bid)?;
        Some(self.vars[i])
    }

    pub fn winners(&self, assignment: &Assignment) -> Vec<u32> {
        self.instance
            .bids
            .iter()
            .zip(&self.vars)
            .filter(|(_, v)| assignment.get(**v).is_some_and(|x| x > 0.5))
            .map(|(b, _)| b.id)
            .collect()
    }
}

pub fn bid_var_name(bid: u32) -> String {
    format!("x_b{bid}")
}

/// One allocation constraint per good that at least two bids compete for;
/// a good wanted by a single bid is already covered by the binary bound.
pub fn build_wdp_milp(inst: &WdpInstance) -> Result<WdpModel, WdpError> {
    inst.validate()?;
    let mut model = MilpModel::new(Sense::Maximize);
    let vars = inst
        .bids
        .iter()
        .map(|b| model.add_binary(bid_var_name(b.id)))
        .collect::<Result<Vec<_>, _>>()?;
    for g in 0..inst.goods {
        let members: Vec<(u32, VarId)> = inst
            .bids
            .iter()
            .zip(&vars)
            .filter(|(b, _)| b.goods.contains(&g))
            .map(|(b, v)| (b.id, *v))
            .collect();
        if members.len() < 2 {
            continue;
        }
        let ids: Vec<u32> = members.iter().map(|(id, _)| *id).collect();
        model.add_constraint(TaggedConstraint::new(
            format!("good[{g}]"),
            LinearExpr::from_terms(members.iter().map(|(_, v)| (*v, 1.0))),
            Relation::Le,
            1.0,
            ConstraintTag::new(ConstraintKind::GoodAllocation)
                .with("g", g)
                .with_list("bids", &ids),
        ))?;
    }
    let objective = LinearExpr::from_terms(inst.bids.iter().zip(&vars).map(|(b, v)| (*v, b.price)));
    model.set_objective(objective)?;
    Ok(WdpModel {
        instance: inst.clone(),
        model,
        vars,
    })
}
