//! Checkpoint (de)serialization shared by the MLP-based models.

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::nn::{Linear, Mlp, Parameter};

pub(crate) fn push_mlp(ck: &mut Checkpoint, mlp: &Mlp) {
    ck.meta.insert(
        "dims".into(),
        mlp.dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","),
    );
    ck.meta.insert("dropout".into(), format!("{:.16e}", mlp.dropout));
    for (i, layer) in mlp.layers.iter().enumerate() {
        ck.push(format!("layer{i}.weight"), &layer.weight.value);
        ck.push(format!("layer{i}.bias"), &layer.bias.value);
    }
}

pub(crate) fn read_mlp(ck: &Checkpoint) -> Result<Mlp> {
    let dims: Vec<usize> = ck
        .meta("dims")?
        .split(',')
        .map(|d| d.parse().map_err(|_| Error::data("bad mlp dims")))
        .collect::<Result<_>>()?;
    if dims.len() < 2 {
        return Err(Error::data("mlp needs at least two widths"));
    }
    let dropout: f64 = ck.meta_parse("dropout")?;
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (i, w) in dims.windows(2).enumerate() {
        let weight = ck.tensor(&format!("layer{i}.weight"))?.clone();
        let bias = ck.tensor(&format!("layer{i}.bias"))?.clone();
        if weight.shape() != (w[0], w[1]) || bias.shape() != (1, w[1]) {
            return Err(Error::data(format!("layer {i} shape disagrees with dims")));
        }
        layers.push(Linear {
            weight: Parameter::new(weight),
            bias: Parameter::new(bias),
        });
    }
    Ok(Mlp { layers, dropout })
}
