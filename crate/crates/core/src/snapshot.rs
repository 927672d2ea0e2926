//! Archive snapshot CSV: one row per entry.
//!
//! Columns: `genotype` and `bd` (semicolon-joined), then `bd_<task>`
//! (two semicolon-joined values) and `f_<task>` for each task. Floats use 17
//! significant digits so values round-trip exactly.

use std::collections::BTreeMap;
use std::path::Path;

use crate::config::Task;
use crate::container::Container;
use crate::error::{Error, Result};
use crate::metrics::TaskPoint;

/// Exact, locale-independent float text.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn parse_float(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        t => t.parse().ok(),
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| format_float(x)).collect::<Vec<_>>().join(";")
}

fn split(s: &str) -> Option<Vec<f64>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    s.split(';').map(parse_float).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub genotype: Vec<f64>,
    pub bd: Vec<f64>,
    pub tasks: BTreeMap<Task, TaskPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Tasks whose columns are present.
    pub tasks: Vec<Task>,
    pub rows: Vec<SnapshotRow>,
}

impl Snapshot {
    pub fn from_container(container: &Container) -> Self {
        let rows = container
            .iter()
            .map(|e| SnapshotRow {
                genotype: e.genotype.params().to_vec(),
                bd: e.bd.clone(),
                tasks: Task::ALL
                    .iter()
                    .map(|&t| {
                        (
                            t,
                            TaskPoint {
                                bd: e.evaluation.task_bd(t),
                                score: e.evaluation.score(t),
                            },
                        )
                    })
                    .collect(),
            })
            .collect();
        Self {
            tasks: Task::ALL.to_vec(),
            rows,
        }
    }

    /// Projection of every row into `task`.
    pub fn task_points(&self, task: Task) -> Result<Vec<TaskPoint>> {
        if !self.tasks.contains(&task) {
            return Err(Error::Config(format!("snapshot has no columns for task `{task}`")));
        }
        Ok(self.rows.iter().map(|r| r.tasks[&task]).collect())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_to(&mut w)?;
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }

    fn write_to<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let mut header = vec!["genotype".to_string(), "bd".to_string()];
        header.extend(self.tasks.iter().map(|t| format!("bd_{t}")));
        header.extend(self.tasks.iter().map(|t| format!("f_{t}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![join(&r.genotype), join(&r.bd)];
            rec.extend(self.tasks.iter().map(|t| join(&r.tasks[t].bd)));
            rec.extend(self.tasks.iter().map(|t| format_float(r.tasks[t].score)));
            w.write_record(&rec)?;
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }

    pub fn read_from<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers()?.clone();
        let col = |name: &str| header.iter().position(|h| h == name);
        let malformed = |row: usize, reason: String| Error::MalformedRow { row, reason };
        let (Some(g_col), Some(bd_col)) = (col("genotype"), col("bd")) else {
            return Err(malformed(0, "header must contain `genotype` and `bd`".into()));
        };
        let mut task_cols = Vec::new();
        for t in Task::ALL {
            match (col(&format!("bd_{t}")), col(&format!("f_{t}"))) {
                (Some(b), Some(f)) => task_cols.push((t, b, f)),
                (None, None) => {}
                _ => return Err(malformed(0, format!("incomplete columns for task `{t}`"))),
            }
        }
        let mut rows = Vec::new();
        for (i, record) in r.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| malformed(row, e.to_string()))?;
            if record.len() != header.len() {
                return Err(malformed(row, format!("expected {} fields, found {}", header.len(), record.len())));
            }
            let vec_field = |c: usize, name: &str| {
                split(&record[c]).ok_or_else(|| malformed(row, format!("unparsable `{name}`")))
            };
            let genotype = vec_field(g_col, "genotype")?;
            let bd = vec_field(bd_col, "bd")?;
            let mut tasks = BTreeMap::new();
            for &(t, b, f) in &task_cols {
                let tbd = vec_field(b, "task descriptor")?;
                let tbd: [f64; 2] = tbd
                    .try_into()
                    .map_err(|_| malformed(row, format!("`bd_{t}` must have 2 values")))?;
                let score = parse_float(&record[f]).ok_or_else(|| malformed(row, format!("unparsable `f_{t}`")))?;
                tasks.insert(t, TaskPoint { bd: tbd, score });
            }
            rows.push(SnapshotRow { genotype, bd, tasks });
        }
        Ok(Self {
            tasks: task_cols.iter().map(|c| c.0).collect(),
            rows,
        })
    }
}
