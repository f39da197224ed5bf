/// One optimiser step, or the initial validation at step 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub utterances: u64,
    /// Mean loss over the step's batch.
    pub train_loss: Option<f64>,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub loss_name: &'static str,
    pub rows: Vec<LogRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |v| format!("{v:.6e}"))
}

impl TrainLog {
    pub fn new(loss_name: &'static str) -> Self {
        Self {
            loss_name,
            rows: Vec::new(),
        }
    }

    /// Tab-separated table with a header line.
    pub fn to_table(&self) -> String {
        let mut out = format!("step\tutterances\t{}\tvalidation\n", self.loss_name);
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.step,
                r.utterances,
                cell(r.train_loss),
                cell(r.validation_loss)
            ));
        }
        out
    }

    pub fn validation_losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().filter_map(|r| r.validation_loss)
    }
}
