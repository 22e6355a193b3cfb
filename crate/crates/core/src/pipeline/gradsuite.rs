use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autonet::gradcheck::{check_cross_entropy, check_layer_kinds, check_network, CheckRow};
use crate::autonet::Tensor;
use crate::classify::{ClassNet, ClassNetConfig};
use crate::dynenh::{check_dynamic_chain, EnhanceNet, EnhanceNetConfig};
use crate::error::Result;
use crate::imgcore::Plane;

/// Every layer kind, the cross-entropy, both desk networks end to end and the
/// dynamic enhancement chain, `coords` random coordinates each.
pub fn gradient_suite(seed: u64, coords: usize, filter_size: usize) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = check_layer_kinds(coords, &mut rng)?;
    rows.push(check_cross_entropy(coords, &mut rng)?);

    let class = ClassNet::new(ClassNetConfig::desk(8))?;
    let params = class.network().init_params(&mut rng);
    let shape = class.network().input_shape().to_vec();
    let len: usize = shape.iter().product();
    let x = Tensor::new(shape, (0..len).map(|_| rng.gen_range(-0.5..0.5)).collect())?;
    for mut row in check_network(class.network(), &params, &x, coords, &mut rng)? {
        row.name = format!("classnet/{}", row.name);
        rows.push(row);
    }

    let enh = EnhanceNet::new(EnhanceNetConfig::desk(filter_size))?;
    let e = enh.config().input_extent;
    let params = enh.network().init_params(&mut rng);
    let y = Plane::new(e, e, (0..e * e).map(|_| rng.gen_range(0.0..1.0)).collect())?;
    let t = Plane::new(e, e, (0..e * e).map(|_| rng.gen_range(0.0..1.0)).collect())?;
    rows.push(check_dynamic_chain(&enh, &params, &y, &t, coords, &mut rng)?);
    Ok(rows)
}
