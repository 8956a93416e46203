//! Client runtime: one local training run and one prediction upload.

use std::io::{BufRead, Write};

use crate::data::{Dataset, PublicPool};
use crate::error::{Error, Result};
use crate::nn::{train_supervised, Activation, Matrix, MlpModel, PredictionMatrix, TrainConfig};
use crate::seed;

/// A client's private architecture and training recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientSpec {
    pub id: usize,
    /// `[input, hidden..., classes]`.
    pub arch: Vec<usize>,
    pub activation: Activation,
    pub train: TrainConfig,
}

impl ClientSpec {
    pub fn classes(&self) -> usize {
        self.arch.last().copied().unwrap_or(0)
    }
}

/// The only message a client ever sends: softmax outputs on the public pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionUpload {
    pub client_id: usize,
    pub probs: PredictionMatrix,
}

impl PredictionUpload {
    pub fn samples(&self) -> usize {
        self.probs.samples()
    }

    pub fn classes(&self) -> usize {
        self.probs.classes()
    }

    /// Header comment `# client_id=<k>`, then `p0,...,p{C-1}` and one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# client_id={}", self.client_id)?;
        let header: Vec<String> = (0..self.classes()).map(|c| format!("p{c}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.probs.matrix().row_iter() {
            let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut client_id = None;
        let mut classes = None;
        let mut data = Vec::new();
        let mut rows = 0;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(id) = rest.trim().strip_prefix("client_id=") {
                    client_id = Some(id.trim().parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad client id `{id}`", i + 1))
                    })?);
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            match classes {
                None => classes = Some(fields.len()),
                Some(c) => {
                    if fields.len() != c {
                        return Err(Error::Parse(format!(
                            "line {}: {} columns, expected {c}",
                            i + 1,
                            fields.len()
                        )));
                    }
                    for f in fields {
                        data.push(f.parse::<f64>().map_err(|_| {
                            Error::Parse(format!("line {}: bad probability `{f}`", i + 1))
                        })?);
                    }
                    rows += 1;
                }
            }
        }
        let client_id =
            client_id.ok_or_else(|| Error::Parse("missing `# client_id=` header".into()))?;
        let classes = classes.ok_or_else(|| Error::Parse("missing column header".into()))?;
        Ok(Self {
            client_id,
            probs: PredictionMatrix::new(Matrix::from_vec(rows, classes, data)?)?,
        })
    }
}

/// Trains the client's model once on its private shard.
///
/// Initialization is drawn from `spec.train.seed` mixed with the client id.
pub fn local_train(spec: &ClientSpec, shard: &Dataset) -> Result<MlpModel> {
    if shard.is_empty() {
        return Err(Error::Precondition(format!("client {} has an empty shard", spec.id)));
    }
    if spec.classes() != shard.classes() {
        return Err(Error::Shape(format!(
            "client {} outputs {} classes, task has {}",
            spec.id,
            spec.classes(),
            shard.classes()
        )));
    }
    let init = MlpModel::new(
        &spec.arch,
        spec.activation,
        seed::derive(spec.train.seed, "client-init", &[spec.id as u64]),
    )?;
    train_supervised(
        init,
        shard.features(),
        &shard.one_hot_labels(),
        &spec.train,
        None,
    )
}

/// Softmax predictions of `model` on the public pool.
pub fn predict_public(
    client_id: usize,
    model: &MlpModel,
    public: &PublicPool,
) -> Result<PredictionUpload> {
    if public.is_empty() {
        return Err(Error::Precondition("public pool is empty".into()));
    }
    Ok(PredictionUpload {
        client_id,
        probs: model.predict_proba(public.features())?,
    })
}
