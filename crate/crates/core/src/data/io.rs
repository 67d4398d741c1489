use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synthetic::GroundTruth;
use crate::attack::MaliciousValues;
use crate::error::{Error, Result};
use crate::types::{AggregationState, ItemId, Observation, ObservationSet, WorkerId};

/// Renders a value with 17 significant digits, enough to read back the
/// identical `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Input layout of an observation file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    /// `worker_id,item_id,value[,is_malicious]` with integer ids.
    #[default]
    Generic,
    /// Tab-separated annotation dump: annotation id, worker, item, value;
    /// lines starting with `!` or `#` are headers or comments.
    Emotion,
    /// Delimited rows `source, key..., value`; the middle columns together
    /// name the item (e.g. city and date).
    Weather,
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "generic" => Ok(Schema::Generic),
            "emotion" => Ok(Schema::Emotion),
            "weather" => Ok(Schema::Weather),
            other => Err(Error::InvalidConfig(format!("unknown schema `{other}`"))),
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schema::Generic => "generic",
            Schema::Emotion => "emotion",
            Schema::Weather => "weather",
        })
    }
}

/// Observations plus what the file said beyond them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub observations: ObservationSet,
    /// Workers flagged in an `is_malicious` column.
    pub malicious_workers: BTreeSet<WorkerId>,
    /// External worker names by dense id; empty for the generic schema.
    pub worker_labels: Vec<String>,
    /// External item names by dense id; empty for the generic schema.
    pub item_labels: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub workers: usize,
    pub items: usize,
    pub values: usize,
}

impl DatasetSummary {
    pub fn of(obs: &ObservationSet) -> Self {
        Self {
            workers: obs.active_workers().count(),
            items: obs.observed_items().count(),
            values: obs.len(),
        }
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} workers, {} items, {} values", self.workers, self.items, self.values)
    }
}

/// Published sizes of the public datasets the adapters target.
pub const EMOTION_REFERENCE: DatasetSummary = DatasetSummary {
    workers: 38,
    items: 700,
    values: 7000,
};
pub const WEATHER_REFERENCE: DatasetSummary = DatasetSummary {
    workers: 152,
    items: 7568,
    values: 936_989,
};

impl Schema {
    pub fn reference(self) -> Option<DatasetSummary> {
        match self {
            Schema::Generic => None,
            Schema::Emotion => Some(EMOTION_REFERENCE),
            Schema::Weather => Some(WEATHER_REFERENCE),
        }
    }
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_value(field: &str, line: u64) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("`{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("`{field}` is not finite")));
    }
    Ok(v)
}

fn parse_id(field: &str, line: u64, what: &str) -> Result<u32> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{what} `{field}` is not a nonnegative integer")))
}

fn parse_flag(field: &str, line: u64) -> Result<bool> {
    match field.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" | "" => Ok(false),
        other => Err(parse_err(line, format!("`{other}` is not a boolean"))),
    }
}

/// Builds the set while remembering the source line of each pair, so a
/// duplicate can be reported where it occurs.
struct Collector {
    rows: Vec<Observation>,
    seen: HashMap<(u32, u32), u64>,
}

impl Collector {
    fn new() -> Self {
        Self {
            rows: Vec::new(),
            seen: HashMap::new(),
        }
    }

    fn push(&mut self, o: Observation, line: u64) -> Result<()> {
        if self.seen.insert((o.worker.0, o.item.0), line).is_some() {
            return Err(Error::DuplicateObservation {
                worker: o.worker,
                item: o.item,
                line: Some(line),
            });
        }
        self.rows.push(o);
        Ok(())
    }

    fn finish(self) -> Result<ObservationSet> {
        if self.rows.is_empty() {
            return Err(Error::EmptyObservations);
        }
        ObservationSet::new(self.rows)
    }
}

/// Reads the generic schema.
pub fn read_generic(reader: impl Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (w_col, i_col, v_col) = match (col("worker_id"), col("item_id"), col("value")) {
        (Some(w), Some(i), Some(v)) => (w, i, v),
        _ => {
            return Err(parse_err(
                1,
                "header must name worker_id, item_id and value",
            ))
        }
    };
    let m_col = col("is_malicious");
    let mut rows = Collector::new();
    let mut malicious = BTreeSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| record.get(k).ok_or_else(|| parse_err(line, "missing column"));
        let worker = parse_id(field(w_col)?, line, "worker id")?;
        let item = parse_id(field(i_col)?, line, "item id")?;
        let value = parse_value(field(v_col)?, line)?;
        if let Some(m) = m_col {
            if parse_flag(field(m)?, line)? {
                malicious.insert(WorkerId(worker));
            }
        }
        rows.push(Observation::new(worker, item, value), line)?;
    }
    Ok(Dataset {
        observations: rows.finish()?,
        malicious_workers: malicious,
        ..Dataset::default()
    })
}

/// Dense ids for external labels, in order of first appearance.
#[derive(Default)]
struct Symbols {
    ids: HashMap<String, u32>,
    labels: Vec<String>,
}

impl Symbols {
    fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.ids.insert(label.to_string(), id);
        self.labels.push(label.to_string());
        id
    }
}

fn read_labelled(
    reader: impl Read,
    mut split: impl FnMut(&str, u64) -> Result<Option<(String, String, f64)>>,
) -> Result<Dataset> {
    let mut workers = Symbols::default();
    let mut items = Symbols::default();
    let mut rows = Collector::new();
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let n = k as u64 + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        if let Some((w, i, v)) = split(trimmed, n)? {
            let o = Observation::new(workers.intern(&w), items.intern(&i), v);
            rows.push(o, n)?;
        }
    }
    Ok(Dataset {
        observations: rows.finish()?,
        malicious_workers: BTreeSet::new(),
        worker_labels: workers.labels,
        item_labels: items.labels,
    })
}

/// Reads the Emotion annotation layout.
pub fn read_emotion(reader: impl Read) -> Result<Dataset> {
    read_labelled(reader, |line, n| {
        if line.starts_with('!') || line.starts_with('#') {
            return Ok(None);
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(parse_err(n, format!("expected 4 tab-separated columns, found {}", cols.len())));
        }
        let value = parse_value(cols[3], n)?;
        Ok(Some((cols[1].trim().to_string(), format!("emotion:{}", cols[2].trim()), value)))
    })
}

/// Reads the Weather layout. The delimiter is a tab when the line has one,
/// otherwise a comma. A first line whose last field is not numeric is taken
/// as a header.
pub fn read_weather(reader: impl Read) -> Result<Dataset> {
    let mut first = true;
    read_labelled(reader, move |line, n| {
        let is_first = std::mem::replace(&mut first, false);
        if line.starts_with('#') {
            return Ok(None);
        }
        let delim = if line.contains('\t') { '\t' } else { ',' };
        let cols: Vec<&str> = line.split(delim).map(str::trim).collect();
        if cols.len() < 3 {
            return Err(parse_err(n, format!("expected at least 3 columns, found {}", cols.len())));
        }
        let last = cols[cols.len() - 1];
        if is_first && last.parse::<f64>().is_err() {
            return Ok(None);
        }
        let value = parse_value(last, n)?;
        let key = cols[1..cols.len() - 1].join("|");
        Ok(Some((cols[0].to_string(), key, value)))
    })
}

pub fn read_dataset(reader: impl Read, schema: Schema) -> Result<Dataset> {
    match schema {
        Schema::Generic => read_generic(reader),
        Schema::Emotion => read_emotion(reader),
        Schema::Weather => read_weather(reader),
    }
}

/// Loads a file and logs its size, comparing against the published counts
/// for the Emotion and Weather layouts.
pub fn load_dataset(path: impl AsRef<Path>, schema: Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let ds = read_dataset(File::open(path)?, schema)?;
    let summary = DatasetSummary::of(&ds.observations);
    log::info!("{}: {summary}", path.display());
    if let Some(reference) = schema.reference() {
        if reference != summary {
            log::warn!("{}: expected {reference} for the {schema} dataset", path.display());
        }
    }
    Ok(ds)
}

pub fn load_observations(path: impl AsRef<Path>, schema: Schema) -> Result<ObservationSet> {
    Ok(load_dataset(path, schema)?.observations)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Writes observations in the generic schema. With `malicious`, an
/// `is_malicious` column flags the workers in that set.
pub fn write_observations(
    obs: &ObservationSet,
    malicious: Option<&BTreeSet<WorkerId>>,
    writer: impl Write,
) -> Result<()> {
    let mut w = csv_writer(writer);
    if malicious.is_some() {
        w.write_record(["worker_id", "item_id", "value", "is_malicious"])?;
    } else {
        w.write_record(["worker_id", "item_id", "value"])?;
    }
    for o in obs.entries() {
        let (wid, iid, v) = (o.worker.0.to_string(), o.item.0.to_string(), format_value(o.value));
        match malicious {
            Some(m) => {
                let flag = if m.contains(&o.worker) { "1" } else { "0" };
                w.write_record([wid.as_str(), iid.as_str(), v.as_str(), flag])?;
            }
            None => w.write_record([wid, iid, v])?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_observations(obs: &ObservationSet, path: impl AsRef<Path>) -> Result<()> {
    write_observations(obs, None, BufWriter::new(File::create(path)?))
}

/// Writes normal and malicious observations together, flagging the latter.
pub fn export_poisoned(obs: &ObservationSet, mal: &MaliciousValues, path: impl AsRef<Path>) -> Result<()> {
    let poisoned = mal.poison(obs)?;
    let flagged: BTreeSet<WorkerId> = mal.iter().map(|(w, _, _)| w).collect();
    write_observations(&poisoned, Some(&flagged), BufWriter::new(File::create(path)?))
}

/// Writes only the malicious values, in the flagged generic schema.
pub fn write_malicious_values(mal: &MaliciousValues, writer: impl Write) -> Result<()> {
    let obs = ObservationSet::new(mal.observations())?;
    let flagged: BTreeSet<WorkerId> = mal.iter().map(|(w, _, _)| w).collect();
    write_observations(&obs, Some(&flagged), writer)
}

/// Writes `item_id,truth` and `worker_id,sigma` files.
pub fn export_ground_truth(
    truth: &GroundTruth,
    items_path: impl AsRef<Path>,
    workers_path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = csv_writer(BufWriter::new(File::create(items_path)?));
    w.write_record(["item_id", "truth"])?;
    for (i, v) in truth.values.iter().enumerate() {
        w.write_record([i.to_string(), format_value(*v)])?;
    }
    w.flush()?;
    let mut w = csv_writer(BufWriter::new(File::create(workers_path)?));
    w.write_record(["worker_id", "sigma"])?;
    for (u, s) in truth.worker_sigmas.iter().enumerate() {
        w.write_record([u.to_string(), format_value(*s)])?;
    }
    w.flush()?;
    Ok(())
}

fn read_id_value_column(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let id = parse_id(record.get(0).unwrap_or(""), line, "id")? as usize;
        let v = parse_value(record.get(1).unwrap_or(""), line)?;
        if id != out.len() {
            return Err(parse_err(line, format!("expected id {}, found {id}", out.len())));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn load_ground_truth(items_path: impl AsRef<Path>, workers_path: impl AsRef<Path>) -> Result<GroundTruth> {
    Ok(GroundTruth {
        values: read_id_value_column(items_path.as_ref())?,
        worker_sigmas: read_id_value_column(workers_path.as_ref())?,
    })
}

/// Writes `item_id,value`, one row per item; items without an estimate
/// get an empty value.
pub fn write_aggregate(state: &AggregationState, writer: impl Write) -> Result<()> {
    write_optional_column(["item_id", "value"], &state.values, writer)
}

/// Writes `worker_id,reliability` (CRH weight or GTM variance).
pub fn write_reliability(state: &AggregationState, writer: impl Write) -> Result<()> {
    write_optional_column(["worker_id", "reliability"], &state.reliability, writer)
}

fn write_optional_column(header: [&str; 2], column: &[Option<f64>], writer: impl Write) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(header)?;
    for (k, v) in column.iter().enumerate() {
        w.write_record([k.to_string(), v.map(format_value).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `item_id,value` file back into a dense vector indexed by item.
/// Rows may come in any order; missing ids and empty values are `None`.
pub fn read_aggregate(reader: impl Read) -> Result<Vec<Option<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: Vec<Option<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let id = parse_id(record.get(0).unwrap_or(""), line, "item id")? as usize;
        let raw = record.get(1).unwrap_or("");
        let v = if raw.is_empty() { None } else { Some(parse_value(raw, line)?) };
        if out.len() <= id {
            out.resize(id + 1, None);
        }
        out[id] = v;
    }
    Ok(out)
}

/// Writes `worker_id,influence` for workers removed by MIE.
pub fn write_removed_workers(removed: &[(WorkerId, f64)], writer: impl Write) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["worker_id", "influence"])?;
    for (u, phi) in removed {
        w.write_record([u.0.to_string(), format_value(*phi)])?;
    }
    w.flush()?;
    Ok(())
}

/// External name of an item, or its numeric id when the file had none.
pub fn item_label(ds: &Dataset, item: ItemId) -> String {
    ds.item_labels
        .get(item.index())
        .cloned()
        .unwrap_or_else(|| item.0.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_format_round_trips() {
        for v in [0.1, -3.25e-300, 1.0 / 3.0, 12345.678901234567, f64::MAX] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_value(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn generic_fixture() {
        let text = "worker_id,item_id,value\n0,0,1.5\n1,0,2.5\n0,2,-1\n";
        let ds = read_generic(text.as_bytes()).unwrap();
        let obs = ds.observations;
        assert_eq!(obs.len(), 3);
        assert_eq!(obs.workers_of(ItemId(0)).count(), 2);
        assert_eq!(obs.items_of(WorkerId(0)).collect::<Vec<_>>(), vec![ItemId(0), ItemId(2)]);
    }

    #[test]
    fn generic_errors_name_lines() {
        assert!(matches!(read_generic("".as_bytes()), Err(_)));
        assert!(matches!(
            read_generic("worker_id,item_id,value\n".as_bytes()),
            Err(Error::EmptyObservations)
        ));
        let dup = "worker_id,item_id,value\n0,0,1\n1,0,2\n0,0,3\n";
        assert!(matches!(
            read_generic(dup.as_bytes()),
            Err(Error::DuplicateObservation { line: Some(4), .. })
        ));
        let bad = "worker_id,item_id,value\n0,0,abc\n";
        assert!(matches!(read_generic(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn flagged_round_trip() {
        let obs = ObservationSet::new([Observation::new(0, 0, 0.1), Observation::new(3, 1, 2.0 / 3.0)]).unwrap();
        let flagged: BTreeSet<WorkerId> = [WorkerId(3)].into();
        let mut buf = Vec::new();
        write_observations(&obs, Some(&flagged), &mut buf).unwrap();
        let ds = read_generic(buf.as_slice()).unwrap();
        assert_eq!(ds.observations, obs);
        assert_eq!(ds.malicious_workers, flagged);
    }

    #[test]
    fn aggregate_round_trip_keeps_gaps() {
        let values = vec![Some(1.0 / 3.0), None, Some(-2.5e7)];
        let state = AggregationState {
            model: crate::types::ModelKind::Crh,
            values: values.clone(),
            reliability: vec![],
            iterations: 1,
            converged: true,
        };
        let mut buf = Vec::new();
        write_aggregate(&state, &mut buf).unwrap();
        assert_eq!(read_aggregate(buf.as_slice()).unwrap(), values);
    }

    #[test]
    fn emotion_layout() {
        let text = "!amt_annotation_ids\t!amt_worker_ids\torig_id\tvalue\n\
                    1\tA1\t10\t-30\n2\tA2\t10\t15\n3\tA1\t11\t70\n";
        let ds = read_emotion(text.as_bytes()).unwrap();
        assert_eq!(DatasetSummary::of(&ds.observations), DatasetSummary { workers: 2, items: 2, values: 3 });
        assert_eq!(ds.worker_labels, vec!["A1", "A2"]);
        assert_eq!(ds.item_labels, vec!["emotion:10", "emotion:11"]);
    }

    #[test]
    fn weather_layout() {
        let text = "source,city,date,high\nwwo,Boston,2010-07-01,81\nham,Boston,2010-07-01,83\nwwo,Austin,2010-07-01,99\n";
        let ds = read_weather(text.as_bytes()).unwrap();
        assert_eq!(ds.observations.len(), 3);
        assert_eq!(ds.item_labels, vec!["Boston|2010-07-01", "Austin|2010-07-01"]);
    }
}
