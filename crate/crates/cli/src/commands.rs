//! The three commands. Heavy work runs on the rayon pool inside the core
//! library; every file is written from this thread.

use std::path::Path;

use cmfp_core::ambiguity::Variant;
use cmfp_core::experiments::{
    elliptical_distance, euclidean_distance, run_lobe_study, run_mismatch_study, run_tail_study,
    run_tracking_study, ArraySpec, GridSpec, TailStudy,
};
use cmfp_core::io::{
    content_hash, read_observations_csv, write_json, write_observations_csv, write_records_csv, write_surface_csv,
    write_surface_matrix, Cache,
};
use cmfp_core::seeds::{derive_seed, rng_from_seed, STREAM_ENCODER, STREAM_LOCATION, STREAM_NOISE};
use cmfp_core::{
    compress_field, draw_encoder, greens_field, locate, Encoder, Environment, Estimator, Location, NoiseModel,
    Observation, Scenario, C64,
};
use log::info;
use serde::Serialize;
use serde_json::json;

use crate::config::{EstimatorKind, Resolved, StudyParams};
use crate::output::{ensure_dir, file_name, Manifest};
use crate::CliError;

/// Keys and hit counts for one command's cache traffic.
#[derive(Debug, Default, Serialize)]
struct CacheReport {
    fields: Vec<String>,
    encoders: Vec<String>,
    computed_fields: usize,
    computed_encoders: usize,
}

/// Content key of one replica field.
fn field_key(env: &Environment, array: &ArraySpec, grid: &GridSpec, frequency_hz: f64) -> cmfp_core::Result<String> {
    content_hash(&json!({
        "kind": "field",
        "environment": env,
        "array": array,
        "grid": grid,
        "frequency_hz": frequency_hz,
    }))
}

fn encoder_key(field_key: &str, m: usize, seed: u64) -> cmfp_core::Result<String> {
    content_hash(&json!({ "kind": "encoder", "field": field_key, "m": m, "seed": seed }))
}

/// Builds the scenario, loading replica fields from the cache when present
/// and storing the ones it has to compute.
fn build_scenario(r: &Resolved, report: &mut CacheReport) -> Result<Scenario, CliError> {
    let cache = Cache::open(r.cache_dir.join("fields"))?;
    let scenario = Scenario::with_field_source(&r.scenario, |_, modes, env, array, grid| {
        let key = field_key(env, &r.scenario.array, &r.scenario.grid, modes.frequency_hz())?;
        report.fields.push(key.clone());
        if let Some(field) = cache.load_field(&key, grid)? {
            return Ok(field);
        }
        info!("computing replica field at {} Hz", modes.frequency_hz());
        let field = greens_field(modes, env, array, grid)?;
        let inputs = json!({ "environment": env, "array": r.scenario.array, "grid": r.scenario.grid });
        cache.store_field(&key, &field, inputs)?;
        report.computed_fields += 1;
        Ok(field)
    })?;
    Ok(scenario)
}

/// One encoder per frequency, seeded exactly like [`Scenario::draw_encoders`]
/// with `base_seed`, through the cache.
fn build_encoders(
    r: &Resolved,
    scenario: &Scenario,
    m: usize,
    base_seed: u64,
    report: &mut CacheReport,
) -> Result<Vec<Encoder>, CliError> {
    let cache = Cache::open(r.cache_dir.join("encoders"))?;
    let n = scenario.array().len();
    let field_keys = report.fields.clone();
    scenario
        .fields()
        .iter()
        .enumerate()
        .map(|(k, field)| {
            let seed = derive_seed(base_seed, &[k as u64]);
            let key = encoder_key(&field_keys[k], m, seed)?;
            report.encoders.push(key.clone());
            if let Some(enc) = cache.load_encoder(&key, scenario.grid())? {
                return Ok(enc);
            }
            let enc = compress_field(&draw_encoder(m, n, seed)?, field)?;
            cache.store_encoder(&key, &enc, json!({ "field": field_keys[k], "m": m, "seed": seed }))?;
            report.computed_encoders += 1;
            Ok(enc)
        })
        .collect::<cmfp_core::Result<Vec<_>>>()
        .map_err(CliError::from)
}

fn localize_encoder_seed(r: &Resolved) -> u64 {
    derive_seed(r.seed, &[STREAM_ENCODER, r.estimator.m as u64])
}

/// Writes `value` to `path` only when the bytes differ, so identical
/// reruns leave the file (and its timestamp) alone.
fn write_json_if_changed<T: Serialize>(path: &Path, value: &T) -> Result<bool, CliError> {
    let mut new = serde_json::to_vec_pretty(value).expect("manifest serializes");
    new.push(b'\n');
    if std::fs::read(path).is_ok_and(|old| old == new) {
        return Ok(false);
    }
    std::fs::write(path, new)?;
    Ok(true)
}

pub fn precompute(r: &Resolved) -> Result<(), CliError> {
    let mut report = CacheReport::default();
    let scenario = build_scenario(r, &mut report)?;
    let encoder_seed = localize_encoder_seed(r);
    build_encoders(r, &scenario, r.estimator.m, encoder_seed, &mut report)?;

    let dir = r.out.join("precompute");
    ensure_dir(&dir)?;
    let mut manifest = Manifest::new("precompute", r)?;
    manifest.seeds = json!({ "encoder": encoder_seed });
    manifest.outputs = vec![r.cache_dir.display().to_string()];
    // Only the keys go in the manifest; the hit counts would change it on
    // every rerun.
    manifest.cache = json!({ "fields": report.fields, "encoders": report.encoders });
    let rewritten = write_json_if_changed(&dir.join("manifest.json"), &manifest)?;

    println!(
        "fields: {} ({} computed), encoders: {} ({} computed, M = {})",
        report.fields.len(),
        report.computed_fields,
        report.encoders.len(),
        report.computed_encoders,
        r.estimator.m
    );
    if report.computed_fields + report.computed_encoders == 0 {
        println!("cache hit: nothing recomputed");
    }
    if rewritten {
        println!("manifest: {}", dir.join("manifest.json").display());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    variant: Variant,
    m: Option<usize>,
    range: f64,
    depth: f64,
    grid_index: usize,
    peak: f64,
    truth: Option<Location>,
    elliptical_error: Option<f64>,
    euclidean_error: Option<f64>,
    noise_variance: Option<f64>,
}

fn load_observations(path: &Path, scenario: &Scenario) -> Result<Vec<Vec<C64>>, CliError> {
    let rows = read_observations_csv(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let freqs = scenario.frequencies_hz();
    if rows.len() != freqs.len() {
        return Err(CliError::Config(format!(
            "{}: {} frequencies, config expects {}",
            path.display(),
            rows.len(),
            freqs.len()
        )));
    }
    let n = scenario.array().len();
    rows.into_iter()
        .zip(freqs)
        .map(|((f, data), &want)| {
            if (f - want).abs() > 1e-9 * want {
                return Err(CliError::Config(format!("{}: frequency {f} Hz, expected {want} Hz", path.display())));
            }
            if data.len() != n {
                return Err(CliError::Config(format!(
                    "{}: {} elements at {f} Hz, array has {n}",
                    path.display(),
                    data.len()
                )));
            }
            Ok(data)
        })
        .collect()
}

pub fn localize(r: &Resolved) -> Result<(), CliError> {
    let block = r.localize.as_ref().expect("localize block is resolved");
    let mut report = CacheReport::default();
    let scenario = build_scenario(r, &mut report)?;
    let noise_seed = derive_seed(r.seed, &[STREAM_NOISE]);

    let (ys, variance) = match &block.observations_csv {
        Some(path) => (load_observations(path, &scenario)?, None),
        None => {
            let source = block.source.expect("synthetic source is resolved");
            match (r.noise.snr_db, r.noise.variance) {
                (Some(snr), _) => {
                    let (ys, v) = scenario.observe(source, Some(snr), noise_seed)?;
                    (ys, Some(v))
                }
                (None, Some(v)) => {
                    let noise = NoiseModel::new(v)?;
                    let mut rng = rng_from_seed(noise_seed);
                    let mut ys = scenario.clean_signal(source)?;
                    for z in ys.iter_mut().flatten() {
                        *z += noise.sample(&mut rng);
                    }
                    (ys, Some(v))
                }
                (None, None) => (scenario.clean_signal(source)?, Some(0.0)),
            }
        }
    };

    let (estimator, encoders) = match r.estimator.kind {
        EstimatorKind::Normalized => (Estimator::Normalized, None),
        EstimatorKind::Unnormalized => (Estimator::Unnormalized, None),
        EstimatorKind::Compressive => {
            let m = r.estimator.m;
            let enc = build_encoders(r, &scenario, m, localize_encoder_seed(r), &mut report)?;
            (Estimator::Compressive { m }, Some(enc))
        }
    };
    let surface = scenario.surface(estimator, &ys, encoders.as_deref())?;
    let estimate = locate(&surface, scenario.grid())?;
    let truth = block.source;
    let result = EstimateReport {
        variant: surface.variant(),
        m: estimator.m(),
        range: estimate.range,
        depth: estimate.depth,
        grid_index: surface.argmax_index(),
        peak: surface.peak(),
        truth,
        elliptical_error: truth.map(|t| elliptical_distance(t, estimate, scenario.metric())),
        euclidean_error: truth.map(|t| euclidean_distance(t, estimate)),
        noise_variance: variance,
    };

    let dir = r.out.join("localize");
    ensure_dir(&dir)?;
    let observations: Vec<Observation> = ys
        .iter()
        .zip(scenario.frequencies_hz())
        .map(|(y, &f)| Observation {
            frequency_hz: f,
            data: y.clone(),
            noise_variance: variance.unwrap_or(f64::NAN),
            rng_seed: noise_seed,
        })
        .collect();
    let files = [
        dir.join("observations.csv"),
        dir.join("surface.csv"),
        dir.join("surface_db.txt"),
        dir.join("estimate.json"),
    ];
    write_observations_csv(&files[0], &observations)?;
    write_surface_csv(&files[1], &surface, scenario.grid())?;
    write_surface_matrix(&files[2], &surface, scenario.grid())?;
    write_json(&files[3], &result)?;

    let mut manifest = Manifest::new("localize", r)?;
    manifest.seeds = json!({
        "noise": noise_seed,
        "encoder": encoders.as_ref().map(|_| localize_encoder_seed(r)),
    });
    manifest.cache = json!({ "fields": report.fields, "encoders": report.encoders });
    manifest.outputs = files.iter().map(|p| file_name(p)).collect();
    manifest.reported = serde_json::to_value(&result).expect("estimate serializes");
    manifest.write(&dir)?;

    println!(
        "estimate ({}): range {:.2} m, depth {:.2} m",
        result.variant, result.range, result.depth
    );
    if let (Some(t), Some(e), Some(d)) = (truth, result.elliptical_error, result.euclidean_error) {
        println!("truth: range {:.2} m, depth {:.2} m", t.range, t.depth);
        println!("error: elliptical {e:.4}, euclidean {d:.3} m");
    }
    Ok(())
}

#[derive(Serialize)]
struct CurveRow {
    variant: Variant,
    m: Option<usize>,
    snr_db: f64,
    threshold: f64,
    exceedance: f64,
    lower: f64,
    upper: f64,
    trials: usize,
}

fn curve_rows(study: &TailStudy) -> Vec<CurveRow> {
    study
        .curves
        .iter()
        .flat_map(|c| {
            (0..c.thresholds.len()).map(move |i| CurveRow {
                variant: c.variant,
                m: c.m,
                snr_db: c.snr_db,
                threshold: c.thresholds[i],
                exceedance: c.exceedance[i],
                lower: c.lower[i],
                upper: c.upper[i],
                trials: c.trials,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct TrackRow {
    index: usize,
    true_range: f64,
    true_depth: f64,
    conventional_range: f64,
    conventional_depth: f64,
    compressive_range: f64,
    compressive_depth: f64,
    conventional_error: f64,
    compressive_error: f64,
}

pub fn study(r: &Resolved) -> Result<(), CliError> {
    let params = r.study.as_ref().expect("study parameters are resolved");
    let mut report = CacheReport::default();
    let scenario = build_scenario(r, &mut report)?;
    let name = r.command.name();
    let dir = r.out.join(name);
    ensure_dir(&dir)?;
    let records_path = dir.join("records.csv");
    let mut outputs = vec![file_name(&records_path)];
    let reported;

    match params {
        StudyParams::Tail(c) => {
            let study = run_tail_study(&scenario, c)?;
            write_records_csv(&records_path, &study.records)?;
            let curves = dir.join("curves.csv");
            write_records_csv(&curves, &curve_rows(&study))?;
            let series = study.unit_exceedance_series();
            let unit = dir.join("unit_exceedance.csv");
            write_records_csv(&unit, &series)?;
            outputs.extend([file_name(&curves), file_name(&unit)]);
            for p in &series {
                let m = p.m.map_or("-".to_string(), |m| m.to_string());
                println!(
                    "{:>9} M={:>3} SNR={:>5.1} dB  P(d > 1) = {:.3} [{:.3}, {:.3}]",
                    p.variant.tag(),
                    m,
                    p.snr_db,
                    p.exceedance,
                    p.lower,
                    p.upper
                );
            }
            reported = json!({ "unit_exceedance": series });
        }
        StudyParams::Lobe(c) => {
            let study = run_lobe_study(&scenario, c)?;
            write_records_csv(&records_path, &study.records)?;
            let rows = dir.join("rows.csv");
            write_records_csv(&rows, &study.rows)?;
            outputs.push(file_name(&rows));
            for row in &study.rows {
                let m = row.m.map_or("-".to_string(), |m| m.to_string());
                println!("{:>9} M={:>3}  median lobe ratio {:.2} dB", row.variant.tag(), m, row.median_ratio_db);
            }
            reported = json!({ "rows": study.rows });
        }
        StudyParams::Mismatch(c) => {
            let study = run_mismatch_study(&scenario, c)?;
            write_records_csv(&records_path, &study.records)?;
            let rows = dir.join("rows.csv");
            write_records_csv(&rows, &study.rows)?;
            outputs.push(file_name(&rows));
            let mut variants: Vec<Variant> = Vec::new();
            for row in &study.rows {
                if !variants.contains(&row.variant) {
                    variants.push(row.variant);
                }
            }
            let mut slopes = serde_json::Map::new();
            for v in variants {
                let slope = study.range_slope(v);
                println!("{:>9}  range error slope {slope:.3} m per m/s", v.tag());
                slopes.insert(v.tag().to_string(), json!(slope));
            }
            reported = json!({ "truth_speed": study.truth_speed, "range_slope": slopes, "rows": study.rows });
        }
        StudyParams::Tracking(c) => {
            let study = run_tracking_study(&scenario, c)?;
            write_records_csv(&records_path, &study.records)?;
            let points = dir.join("points.csv");
            let rows: Vec<TrackRow> = study
                .points
                .iter()
                .map(|p| TrackRow {
                    index: p.index,
                    true_range: p.truth.range,
                    true_depth: p.truth.depth,
                    conventional_range: p.conventional.range,
                    conventional_depth: p.conventional.depth,
                    compressive_range: p.compressive.range,
                    compressive_depth: p.compressive.depth,
                    conventional_error: p.conventional_error,
                    compressive_error: p.compressive_error,
                })
                .collect();
            write_records_csv(&points, &rows)?;
            outputs.push(file_name(&points));
            println!(
                "median euclidean error: conventional {:.2} m, compressive (M = {}) {:.2} m",
                study.conventional_median, study.m, study.compressive_median
            );
            reported = json!({
                "m": study.m,
                "snr_db": study.snr_db,
                "conventional_median_m": study.conventional_median,
                "compressive_median_m": study.compressive_median,
            });
        }
    }

    let mut manifest = Manifest::new(name, r)?;
    manifest.seeds = json!({
        "master": r.seed,
        "streams": { "location": STREAM_LOCATION, "noise": STREAM_NOISE, "encoder": STREAM_ENCODER },
    });
    manifest.cache = json!({ "fields": report.fields });
    manifest.outputs = outputs;
    manifest.reported = reported;
    let path = manifest.write(&dir)?;
    println!("wrote {}", path.display());
    Ok(())
}
