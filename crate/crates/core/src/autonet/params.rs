use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockRole {
    Weight,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub layer: usize,
    pub role: BlockRole,
    pub offset: usize,
    pub len: usize,
    /// Fan-in and fan-out used by the uniform initialization law.
    pub fan_in: usize,
    pub fan_out: usize,
}

/// Where every layer's weight and bias live inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParamLayout {
    blocks: Vec<Block>,
    total: usize,
}

impl ParamLayout {
    pub(crate) fn push(&mut self, layer: usize, role: BlockRole, len: usize, fan_in: usize, fan_out: usize) {
        self.blocks.push(Block { layer, role, offset: self.total, len, fan_in, fan_out });
        self.total += len;
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn total_count(&self) -> usize {
        self.total
    }

    pub fn find(&self, layer: usize, role: BlockRole) -> Option<&Block> {
        self.blocks.iter().find(|b| b.layer == layer && b.role == role)
    }
}

macro_rules! flat_store {
    ($name:ident) => {
        impl $name {
            pub fn layout(&self) -> &Arc<ParamLayout> {
                &self.layout
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [f64] {
                &mut self.values
            }

            pub fn total_count(&self) -> usize {
                self.values.len()
            }

            pub fn block(&self, layer: usize, role: BlockRole) -> Option<&[f64]> {
                self.layout.find(layer, role).map(|b| &self.values[b.offset..b.offset + b.len])
            }

            pub fn block_mut(&mut self, layer: usize, role: BlockRole) -> Option<&mut [f64]> {
                let b = self.layout.find(layer, role)?.clone();
                Some(&mut self.values[b.offset..b.offset + b.len])
            }

            pub fn same_layout(&self, layout: &ParamLayout) -> bool {
                *self.layout == *layout
            }
        }
    };
}

/// Learnable parameters of one network, flat-addressable by block.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    layout: Arc<ParamLayout>,
    values: Vec<f64>,
}

/// Gradient store with exactly the block layout of its [`NetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layout: Arc<ParamLayout>,
    values: Vec<f64>,
}

flat_store!(NetParams);
flat_store!(Gradients);

impl NetParams {
    pub fn from_values(layout: Arc<ParamLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_count() {
            return Err(Error::Layout(format!(
                "layout holds {} parameters, got {}",
                layout.total_count(),
                values.len()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let n = layout.total_count();
        Self { layout, values: vec![0.0; n] }
    }
}

impl Gradients {
    pub fn zeros_like(params: &NetParams) -> Self {
        Self { layout: params.layout.clone(), values: vec![0.0; params.values.len()] }
    }

    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let n = layout.total_count();
        Self { layout, values: vec![0.0; n] }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) -> Result<()> {
        if *self.layout != *other.layout {
            return Err(Error::Layout("gradient layouts differ".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn block_range(&self, layer: usize, role: BlockRole) -> std::ops::Range<usize> {
        let b = self.layout.find(layer, role).expect("block exists for layer");
        b.offset..b.offset + b.len
    }
}

pub(crate) fn ensure_layout(params: &NetParams, layout: &ParamLayout) -> Result<()> {
    if !params.same_layout(layout) {
        return Err(Error::Layout(format!(
            "parameters ({} values) do not belong to this network ({} values)",
            params.total_count(),
            layout.total_count()
        )));
    }
    Ok(())
}
