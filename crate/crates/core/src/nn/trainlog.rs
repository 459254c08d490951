use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Losses recorded at the end of one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub terms: BTreeMap<String, f64>,
}

/// Per-epoch loss history of a training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    /// Stores the record and emits its `epoch=<n> loss=<f>` line at info level.
    pub fn push(&mut self, epoch: usize, loss: f64, terms: BTreeMap<String, f64>) {
        log::info!("{}", line(epoch, loss, &terms));
        self.epochs.push(EpochRecord { epoch, loss, terms });
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }

    /// One line per epoch.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let _ = writeln!(out, "{}", line(e.epoch, e.loss, &e.terms));
        }
        out
    }
}

fn line(epoch: usize, loss: f64, terms: &BTreeMap<String, f64>) -> String {
    let mut s = format!("epoch={epoch} loss={loss:.6}");
    for (k, v) in terms {
        let _ = write!(s, " {k}={v:.6}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_are_parseable() {
        let mut log = TrainingLog::default();
        log.push(0, 1.5, BTreeMap::from([("rec".to_string(), 0.25)]));
        log.push(1, 0.75, BTreeMap::new());
        assert_eq!(log.to_text(), "epoch=0 loss=1.500000 rec=0.250000\nepoch=1 loss=0.750000\n");
        assert_eq!(log.losses(), vec![1.5, 0.75]);
    }
}
