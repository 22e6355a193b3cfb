use crate::dynenh::{mean_filter, DynamicFilter, EnhanceNet};
use crate::autonet::NetParams;
use crate::enhance::EnhanceMethod;
use crate::error::{Error, Result};
use crate::imgcore::Plane;

/// Fixed filters, one per method, plus the identity filter of the RGB stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticFilterBank {
    pub methods: Vec<EnhanceMethod>,
    pub filters: Vec<DynamicFilter>,
    pub identity: DynamicFilter,
}

impl StaticFilterBank {
    pub fn new(methods: Vec<EnhanceMethod>, filters: Vec<DynamicFilter>) -> Result<Self> {
        let first = filters.first().ok_or_else(|| Error::param("a filter bank needs at least one filter"))?;
        if methods.len() != filters.len() {
            return Err(Error::dim(format!("{} methods for {} filters", methods.len(), filters.len())));
        }
        let s = first.size();
        if filters.iter().any(|f| f.size() != s) {
            return Err(Error::dim("bank filters differ in size"));
        }
        Ok(Self { methods, identity: DynamicFilter::identity(s)?, filters })
    }

    /// All-identity bank, the degenerate pipeline.
    pub fn identity(methods: Vec<EnhanceMethod>, size: usize) -> Result<Self> {
        let filters = vec![DynamicFilter::identity(size)?; methods.len()];
        Self::new(methods, filters)
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn filter_size(&self) -> usize {
        self.identity.size()
    }
}

/// The filter a trained network generates for each luminance plane.
pub fn per_image_filters(net: &EnhanceNet, params: &NetParams, lumas: &[Plane]) -> Result<Vec<DynamicFilter>> {
    lumas.iter().map(|y| Ok(net.generate_filter(params, y)?.0)).collect()
}

/// Element-wise mean of each method's per-image filters over `lumas`.
pub fn derive_static_filters(
    net: &EnhanceNet,
    methods: &[EnhanceMethod],
    params: &[NetParams],
    lumas: &[Plane],
) -> Result<StaticFilterBank> {
    if lumas.is_empty() {
        return Err(Error::param("cannot derive static filters from an empty training set"));
    }
    if methods.len() != params.len() {
        return Err(Error::dim(format!("{} methods for {} parameter sets", methods.len(), params.len())));
    }
    let filters = params
        .iter()
        .map(|p| mean_filter(&per_image_filters(net, p, lumas)?))
        .collect::<Result<Vec<_>>>()?;
    StaticFilterBank::new(methods.to_vec(), filters)
}
