//! The work behind each CLI subcommand: ingest raw CSVs into per-airport
//! matrices, generate synthetic tensors, score them against the real data,
//! and run the causality comparison.
//!
//! Every command is deterministic given its inputs, the config, and
//! `master_seed`. Sub-seeds are derived from the master seed under a small
//! namespace so no two stages ever share a stream:
//!
//! * `[1, kind, airport]` — refinery seed for one (airport, kind) batch,
//! * `[2, kind, airport, realisation]` — evaluation classifier scoring,
//! * `[3, kind]` — shuffle surrogate for the causality comparison,
//!
//! where `kind` is 0 for departures and 1 for arrivals and `airport` is the
//! position in the configured airport list. Output files are written to a
//! temp path and renamed into place, so a crashed run never leaves a
//! half-written artifact under the final name.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::config::RunConfig;
use crate::discriminator::{discriminative_score, ScoreDistribution};
use crate::error::{Error, Result};
use crate::evaluation::{correlation_score, pca_project};
use crate::ingest::{self, IngestConfig, RejectEntry};
use crate::matrix::{DelayMatrix, Kind, RegionName, HOURS};
use crate::npy::{NpyReader, NpyWriter};
use crate::propagation::{gc_matrix, log10_p_histogram, shuffle_surrogate, write_gc_csv, GcConfig, GcResult, SeriesKind};
use crate::refinery::{self, RefineryConfig};
use crate::rng::{derive_seed, Stream};

const KINDS: [Kind; 2] = [Kind::Departure, Kind::Arrival];

/// Seed-path component for a movement kind. Part of the reproducibility
/// contract: changing these values changes every generated tensor.
fn kind_tag(kind: Kind) -> u64 {
    match kind {
        Kind::Departure => 0,
        Kind::Arrival => 1,
    }
}

fn region_tag(name: RegionName) -> &'static str {
    match name {
        RegionName::EU => "EU",
        RegionName::US => "US",
    }
}

/// `<dir>/<AIRPORT>.<Dep|Arr>.npy`, the layout `ingest` writes.
pub fn matrix_path(dir: &Path, airport: &str, kind: Kind) -> PathBuf {
    dir.join(format!("{airport}.{}.npy", kind.file_tag()))
}

/// `EUArr`, `USDep`, ... — the stem shared by a tensor and its sidecars.
pub fn tensor_stem(region: RegionName, kind: Kind) -> String {
    format!("{}{}", region_tag(region), kind.file_tag())
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// What `ingest` produced, for reporting.
#[derive(Debug)]
pub struct IngestSummary {
    pub matrices: Vec<PathBuf>,
    pub n_records: usize,
    pub n_rejects: usize,
    /// Where the reject report went, when there was anything to report.
    pub rejects_path: Option<PathBuf>,
}

/// Parse every `.csv` under `input_dir` and write one matrix file per
/// configured airport and movement kind into `out_dir`.
pub fn cmd_ingest(
    run: &RunConfig,
    cfg: &IngestConfig,
    input_dir: &Path,
    out_dir: &Path,
) -> Result<IngestSummary> {
    run.validate()?;
    cfg.validate()?;

    let mut csv_paths: Vec<PathBuf> = fs::read_dir(input_dir)
        .map_err(|e| Error::io(input_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("csv"))
        .collect();
    csv_paths.sort();
    if csv_paths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no .csv files in {}",
            input_dir.display()
        )));
    }
    create_out_dir(out_dir)?;

    let mut records = Vec::new();
    let mut rejects: Vec<(String, RejectEntry)> = Vec::new();
    for path in &csv_paths {
        let (mut parsed, file_rejects) = ingest::parse_flight_csv(path, &cfg.schema)?;
        records.append(&mut parsed);
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        rejects.extend(file_rejects.into_iter().map(|r| (name.clone(), r)));
    }

    let calendar = cfg.calendar();
    let mut matrices = Vec::new();
    for airport in &run.airports {
        let tz = cfg.timezone(airport)?;
        for kind in KINDS {
            let m = ingest::aggregate_hourly(&records, airport, kind, run.region.unit, tz, &calendar)?;
            let path = matrix_path(out_dir, airport, kind);
            ingest::save_matrix(&m, &path)?;
            matrices.push(path);
        }
    }

    let rejects_path = if rejects.is_empty() {
        None
    } else {
        let path = out_dir.join("rejects.csv");
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let fail = |e: csv::Error| Error::format("rejects.csv", e.to_string());
            w.write_record(["file", "row", "message"]).map_err(fail)?;
            for (file, r) in &rejects {
                w.write_record([file.as_str(), &r.row.to_string(), &r.message]).map_err(fail)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        write_atomic(&path, &buf)?;
        Some(path)
    };

    Ok(IngestSummary {
        matrices,
        n_records: records.len(),
        n_rejects: rejects.len(),
        rejects_path,
    })
}

/// Load the matrices of every configured airport for one kind, insisting
/// they agree on unit (per region) and day count.
fn load_kind_matrices(run: &RunConfig, matrix_dir: &Path, kind: Kind) -> Result<Vec<DelayMatrix>> {
    let mut matrices = Vec::with_capacity(run.airports.len());
    for airport in &run.airports {
        let path = matrix_path(matrix_dir, airport, kind);
        let m = ingest::load_matrix_for_region(&path, run.region)?;
        if m.airport != *airport {
            return Err(Error::format(
                &path,
                format!("file claims airport {}, expected {airport}", m.airport),
            ));
        }
        if let Some(first) = matrices.first() {
            let first: &DelayMatrix = first;
            if m.days() != first.days() {
                return Err(Error::format(
                    &path,
                    format!(
                        "{} covers {} days but {} covers {}",
                        m.airport,
                        m.days(),
                        first.airport,
                        first.days()
                    ),
                ));
            }
        }
        matrices.push(m);
    }
    Ok(matrices)
}

/// Which kinds have a complete matrix set under `matrix_dir`. A kind with no
/// files at all is skipped; a partial set is an error naming the gaps.
fn kinds_on_disk(run: &RunConfig, matrix_dir: &Path) -> Result<Vec<Kind>> {
    let mut found = Vec::new();
    for kind in KINDS {
        let missing: Vec<&String> = run
            .airports
            .iter()
            .filter(|a| !matrix_path(matrix_dir, a, kind).exists())
            .collect();
        if missing.is_empty() {
            found.push(kind);
        } else if missing.len() < run.airports.len() {
            return Err(Error::format(
                matrix_dir,
                format!(
                    "incomplete {} matrix set: missing {}",
                    kind.file_tag(),
                    missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
                ),
            ));
        }
    }
    if found.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no matrices for any configured airport in {}",
            matrix_dir.display()
        )));
    }
    Ok(found)
}

/// Generate the synthetic tensors: one NPY per movement kind found in
/// `matrix_dir`, shaped (airports, realisations, days, 24), plus the airport
/// list and provenance sidecars. Returns the files written.
pub fn cmd_generate(
    run: &RunConfig,
    matrix_dir: &Path,
    refinery_log: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    run.validate()?;
    create_out_dir(&run.output_dir)?;
    let mut log_sink = match refinery_log {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            Some(BufWriter::new(file))
        }
        None => None,
    };

    let mut written = Vec::new();
    for kind in kinds_on_disk(run, matrix_dir)? {
        written.extend(generate_kind(run, matrix_dir, kind, &mut log_sink)?);
    }
    if let Some(mut sink) = log_sink {
        sink.flush().map_err(|e| {
            Error::io(refinery_log.expect("sink exists only with a path"), e)
        })?;
    }
    Ok(written)
}

fn generate_kind(
    run: &RunConfig,
    matrix_dir: &Path,
    kind: Kind,
    log_sink: &mut Option<BufWriter<File>>,
) -> Result<Vec<PathBuf>> {
    let matrices = load_kind_matrices(run, matrix_dir, kind)?;
    let days = matrices[0].days();
    let shape = [run.airports.len(), run.n_realisations, days, HOURS];

    let stem = tensor_stem(run.region.name, kind);
    let tensor_path = run.output_dir.join(format!("{stem}.npy"));
    let tmp_path = run.output_dir.join(format!("{stem}.npy.tmp"));
    let file = File::create(&tmp_path).map_err(|e| Error::io(&tmp_path, e))?;
    let mut writer =
        NpyWriter::new(BufWriter::new(file), &shape).map_err(|e| Error::io(&tmp_path, e))?;

    let mut replaced_per_airport = Vec::with_capacity(matrices.len());
    for (a_idx, real) in matrices.iter().enumerate() {
        let r_cfg = RefineryConfig {
            rng_seed: derive_seed(run.master_seed, &[1, kind_tag(kind), a_idx as u64]),
            ..run.refinery.clone()
        };
        let datasets = match log_sink {
            // The logged path runs realisations sequentially but derives the
            // identical per-realisation seeds, so the tensor bytes match the
            // parallel path bit for bit.
            Some(sink) => {
                let mut out = Vec::with_capacity(run.n_realisations);
                for i in 0..run.n_realisations {
                    let header = serde_json::json!({
                        "airport": real.airport,
                        "kind": kind,
                        "realisation": i,
                    });
                    writeln!(sink, "{header}").map_err(|e| Error::io("refinery log", e))?;
                    let cfg_i = RefineryConfig {
                        rng_seed: derive_seed(r_cfg.rng_seed, &[4, i as u64]),
                        ..r_cfg.clone()
                    };
                    out.push(refinery::assemble_with_log(
                        real,
                        &run.sampler,
                        &cfg_i,
                        Some(sink as &mut dyn Write),
                    )?);
                }
                out
            }
            None => refinery::batch_generate(real, &run.sampler, &r_cfg, run.n_realisations)?,
        };
        let mut replaced_total = 0usize;
        for ds in &datasets {
            replaced_total += ds.provenance.replacements.iter().sum::<usize>();
            let flat = ds.values.as_slice().expect("synthetic values are contiguous");
            writer.append(flat).map_err(|e| Error::io(&tmp_path, e))?;
        }
        replaced_per_airport.push(replaced_total);
    }
    writer.finish().map_err(|e| Error::io(&tmp_path, e))?;
    fs::rename(&tmp_path, &tensor_path).map_err(|e| Error::io(&tensor_path, e))?;

    let airports_path = run.output_dir.join(format!("{stem}.airports.txt"));
    let mut listing = run.airports.join("\n");
    listing.push('\n');
    write_atomic(&airports_path, listing.as_bytes())?;

    let first = &matrices[0];
    let provenance = serde_json::json!({
        "region": region_tag(run.region.name),
        "kind": kind,
        "unit": first.unit,
        "shape": shape,
        "days": { "first": first.day_labels.first(), "last": first.day_labels.last() },
        "master_seed": run.master_seed,
        "airports": run.airports,
        "sampler": run.sampler,
        "refinery": run.refinery,
        "replacements_per_airport": run
            .airports
            .iter()
            .zip(&replaced_per_airport)
            .map(|(a, &n)| (a.clone(), n))
            .collect::<BTreeMap<String, usize>>(),
    });
    let provenance_path = run.output_dir.join(format!("{stem}.provenance.json"));
    let pretty = serde_json::to_vec_pretty(&provenance)
        .map_err(|e| Error::format(&provenance_path, e.to_string()))?;
    write_atomic(&provenance_path, &pretty)?;

    Ok(vec![tensor_path, airports_path, provenance_path])
}

/// One airport's realisation block, streamed out of a tensor file.
struct TensorView {
    reader: NpyReader,
    n_realisations: usize,
    days: usize,
}

impl TensorView {
    fn open(path: &Path, n_airports: usize) -> Result<TensorView> {
        let reader = NpyReader::open(path)?;
        let shape = reader.shape().to_vec();
        if shape.len() != 4 || shape[3] != HOURS {
            return Err(Error::format(
                path,
                format!("expected an (airports, realisations, days, {HOURS}) tensor, found {shape:?}"),
            ));
        }
        if shape[0] != n_airports {
            return Err(Error::format(
                path,
                format!("tensor holds {} airports, config lists {n_airports}", shape[0]),
            ));
        }
        Ok(TensorView { reader, n_realisations: shape[1], days: shape[2] })
    }

    fn realisation(&mut self, airport_idx: usize, realisation: usize) -> Result<Array2<f64>> {
        let block = self.days * HOURS;
        let offset = (airport_idx * self.n_realisations + realisation) * block;
        let values = self.reader.read_block(offset, block)?;
        Ok(Array2::from_shape_vec((self.days, HOURS), values)
            .expect("block length matches days × hours"))
    }
}

/// Score the generated tensors against the stored real matrices. Per kind
/// this writes `<STEM>.scores.csv` (one row per airport: the discriminative-
/// score distribution over the evaluated realisations), `<STEM>.correlation.csv`,
/// and a `<AIRPORT>.<Dep|Arr>.pca.csv` projection per airport.
pub fn cmd_evaluate(
    run: &RunConfig,
    matrix_dir: &Path,
    tensor_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    run.validate()?;
    create_out_dir(out_dir)?;

    let mut written = Vec::new();
    let mut any_tensor = false;
    for kind in KINDS {
        let stem = tensor_stem(run.region.name, kind);
        let tensor_path = tensor_dir.join(format!("{stem}.npy"));
        if !tensor_path.exists() {
            continue;
        }
        any_tensor = true;
        let mut tensor = TensorView::open(&tensor_path, run.airports.len())?;
        let n_eval = run.eval_repeats.min(tensor.n_realisations);

        let mut score_rows = Vec::new();
        let mut corr_rows = Vec::new();
        for (a_idx, airport) in run.airports.iter().enumerate() {
            let real = ingest::load_matrix_for_region(&matrix_path(matrix_dir, airport, kind), run.region)?;
            if real.days() != tensor.days {
                return Err(Error::format(
                    &tensor_path,
                    format!(
                        "tensor has {} days per realisation, matrix for {airport} has {}",
                        tensor.days,
                        real.days()
                    ),
                ));
            }

            let mut scores = Vec::with_capacity(n_eval);
            let mut pooled = Array2::zeros((n_eval * tensor.days, HOURS));
            for r in 0..n_eval {
                let synth = tensor.realisation(a_idx, r)?;
                let cfg = crate::discriminator::DiscriminatorConfig {
                    rng_seed: derive_seed(run.master_seed, &[2, kind_tag(kind), a_idx as u64, r as u64]),
                    ..run.discriminator_eval.clone()
                };
                let dist = discriminative_score(real.values.view(), synth.view(), &cfg, 1)?;
                scores.push(dist.scores[0]);
                pooled
                    .slice_mut(ndarray::s![r * tensor.days..(r + 1) * tensor.days, ..])
                    .assign(&synth);
            }
            let dist = ScoreDistribution::from_scores(scores);
            score_rows.push((airport.clone(), n_eval, dist));

            let corr = correlation_score(real.values.view(), pooled.view())?;
            corr_rows.push((airport.clone(), corr));

            let first_realisation = tensor.realisation(a_idx, 0)?;
            let projection = pca_project(real.values.view(), first_realisation.view())?;
            let pca_path = out_dir.join(format!("{airport}.{}.pca.csv", kind.file_tag()));
            let mut buf = Vec::new();
            projection.write_csv(&mut buf)?;
            write_atomic(&pca_path, &buf)?;
            written.push(pca_path);
        }

        let scores_path = out_dir.join(format!("{stem}.scores.csv"));
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let fail = |e: csv::Error| Error::format("scores.csv", e.to_string());
            w.write_record(["airport", "n_datasets", "min", "median", "max"]).map_err(fail)?;
            for (airport, n, dist) in &score_rows {
                w.write_record([
                    airport.as_str(),
                    &n.to_string(),
                    &dist.min.to_string(),
                    &dist.median.to_string(),
                    &dist.max.to_string(),
                ])
                .map_err(fail)?;
            }
            w.flush().map_err(|e| Error::io(&scores_path, e))?;
        }
        write_atomic(&scores_path, &buf)?;
        written.push(scores_path);

        let corr_path = out_dir.join(format!("{stem}.correlation.csv"));
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let fail = |e: csv::Error| Error::format("correlation.csv", e.to_string());
            w.write_record(["airport", "min", "median", "max"]).map_err(fail)?;
            for (airport, corr) in &corr_rows {
                w.write_record([
                    airport.as_str(),
                    &corr.min.to_string(),
                    &corr.median.to_string(),
                    &corr.max.to_string(),
                ])
                .map_err(fail)?;
            }
            w.flush().map_err(|e| Error::io(&corr_path, e))?;
        }
        write_atomic(&corr_path, &buf)?;
        written.push(corr_path);
    }

    if !any_tensor {
        return Err(Error::InvalidArgument(format!(
            "no generated tensors found in {}",
            tensor_dir.display()
        )));
    }
    Ok(written)
}

/// Run the directed-influence comparison on real, synthetic, and (optionally)
/// shuffled series. Writes `<STEM>.gc.csv` with every directed pair per
/// series kind, and `<STEM>.gc_hist.json` with the log10 p-value histograms.
pub fn cmd_propagation(
    run: &RunConfig,
    matrix_dir: &Path,
    tensor_dir: &Path,
    out_dir: &Path,
    gc: &GcConfig,
    include_shuffled: bool,
) -> Result<Vec<PathBuf>> {
    run.validate()?;
    gc.validate()?;
    create_out_dir(out_dir)?;

    let mut written = Vec::new();
    let mut any_tensor = false;
    for kind in KINDS {
        let stem = tensor_stem(run.region.name, kind);
        let tensor_path = tensor_dir.join(format!("{stem}.npy"));
        if !tensor_path.exists() {
            continue;
        }
        any_tensor = true;
        let mut tensor = TensorView::open(&tensor_path, run.airports.len())?;

        let mut real_map = BTreeMap::new();
        let mut synth_map = BTreeMap::new();
        for (a_idx, airport) in run.airports.iter().enumerate() {
            let real = ingest::load_matrix_for_region(&matrix_path(matrix_dir, airport, kind), run.region)?;
            real_map.insert(airport.clone(), real.values);
            synth_map.insert(airport.clone(), tensor.realisation(a_idx, 0)?);
        }

        let mut results: Vec<GcResult> = gc_matrix(&real_map, gc, SeriesKind::Real)?;
        results.extend(gc_matrix(&synth_map, gc, SeriesKind::Synthetic)?);
        if include_shuffled {
            let mut rng = Stream::derived(run.master_seed, &[3, kind_tag(kind)]);
            let shuffled_map: BTreeMap<String, Array2<f64>> = real_map
                .iter()
                .map(|(a, m)| (a.clone(), shuffle_surrogate(m.view(), &mut rng)))
                .collect();
            results.extend(gc_matrix(&shuffled_map, gc, SeriesKind::Shuffled)?);
        }

        let csv_path = out_dir.join(format!("{stem}.gc.csv"));
        let mut buf = Vec::new();
        write_gc_csv(&results, &mut buf)?;
        write_atomic(&csv_path, &buf)?;
        written.push(csv_path);

        let hist_path = out_dir.join(format!("{stem}.gc_hist.json"));
        let mut histograms = Vec::new();
        for series in [SeriesKind::Real, SeriesKind::Synthetic, SeriesKind::Shuffled] {
            let subset: Vec<GcResult> =
                results.iter().filter(|r| r.series_kind == series).cloned().collect();
            if !subset.is_empty() {
                histograms.push(log10_p_histogram(&subset, -30.0, 30));
            }
        }
        let json = serde_json::to_vec_pretty(&serde_json::Value::Array(histograms))
            .map_err(|e| Error::format(&hist_path, e.to_string()))?;
        write_atomic(&hist_path, &json)?;
        written.push(hist_path);
    }

    if !any_tensor {
        return Err(Error::InvalidArgument(format!(
            "no generated tensors found in {}",
            tensor_dir.display()
        )));
    }
    Ok(written)
}
