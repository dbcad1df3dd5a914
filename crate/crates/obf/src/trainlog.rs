//! Training log CSV. Metadata lines start with `# ` and hold `key = value`
//! pairs; the data columns are
//! `epoch,lr,loss_rc,loss_pc,loss_fi,loss_cl,val_rc_dist,val_pc_dist,val_fi_auc,val_cl_acc`.
//! Cells of disabled tasks, and metrics that could not be computed, are
//! empty.

use std::fmt::Write as _;

use obf_core::model::{Task, TaskSet};
use obf_core::pretrain::EpochLog;

pub const COLUMNS: [&str; 10] = [
    "epoch",
    "lr",
    "loss_rc",
    "loss_pc",
    "loss_fi",
    "loss_cl",
    "val_rc_dist",
    "val_pc_dist",
    "val_fi_auc",
    "val_cl_acc",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub lr: f64,
    /// rc, pc, fi, cl.
    pub losses: [Option<f64>; 4],
    pub val: [Option<f64>; 4],
}

impl LogRow {
    pub fn from_epoch(e: &EpochLog, tasks: TaskSet) -> Self {
        let losses = Task::ALL.map(|t| tasks.contains(t).then(|| e.losses.get(t)));
        let v = &e.val;
        Self {
            epoch: e.epoch,
            lr: e.lr,
            losses,
            val: [v.rc_dist_deg, v.pc_dist_deg, v.fi_auc, v.cl_acc],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub meta: Vec<(String, String)>,
    pub rows: Vec<LogRow>,
}

fn cell(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        write!(out, "{v}").unwrap();
    }
}

impl TrainingLog {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn header_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        out.push_str(&COLUMNS.join(","));
        out.push('\n');
        out
    }

    pub fn row_text(row: &LogRow) -> String {
        let mut out = format!("{},{}", row.epoch, row.lr);
        for v in row.losses.iter().chain(&row.val) {
            cell(&mut out, *v);
        }
        out.push('\n');
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header_text();
        for r in &self.rows {
            out.push_str(&Self::row_text(r));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut log = Self::default();
        let mut lines = text.lines().enumerate();
        let mut header_seen = false;
        for (i, line) in &mut lines {
            if let Some(m) = line.strip_prefix('#') {
                let (k, v) = m
                    .split_once('=')
                    .ok_or_else(|| format!("line {}: metadata must be `# key = value`", i + 1))?;
                log.meta.push((k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            if line.split(',').ne(COLUMNS) {
                return Err(format!(
                    "line {}: expected header `{}`",
                    i + 1,
                    COLUMNS.join(",")
                ));
            }
            header_seen = true;
            break;
        }
        if !header_seen {
            return Err("no header line".into());
        }
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != COLUMNS.len() {
                return Err(format!("line {}: expected {} cells", i + 1, COLUMNS.len()));
            }
            let bad = |c: &str| format!("line {}: bad value `{c}`", i + 1);
            let opt = |c: &str| -> Result<Option<f64>, String> {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse().map(Some).map_err(|_| bad(c))
                }
            };
            let mut vals = [None; 8];
            for (slot, c) in vals.iter_mut().zip(&cells[2..]) {
                *slot = opt(c)?;
            }
            log.rows.push(LogRow {
                epoch: cells[0].parse().map_err(|_| bad(cells[0]))?,
                lr: cells[1].parse().map_err(|_| bad(cells[1]))?,
                losses: [vals[0], vals[1], vals[2], vals[3]],
                val: [vals[4], vals[5], vals[6], vals[7]],
            });
        }
        Ok(log)
    }
}
