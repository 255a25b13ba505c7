//! File formats and run configuration.
//!
//! Tables are CSV with unit-suffixed headers. Numbers are written with Rust's
//! shortest round-trip formatting, so reading a file and writing it back
//! reproduces it byte for byte. Matrix-shaped tables put both axes in the
//! corner cell, e.g. `tau_us/freq_GHz`: the header row holds column
//! coordinates and the first field of each row its row coordinate.
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::ScanConfig;
use crate::lindblad::DecoherenceParams;
use crate::mbvd::{ComplexSpectrum, MbvdParams};
use crate::measured::Measured;
use crate::spectro::{FftSpectrum, Propagation, RabiSpectrogram, Taper};
use crate::spin::Transition;

pub const SPECTROGRAM_CORNER: &str = "tau_us/freq_GHz";
pub const FFT_CORNER: &str = "rabi_MHz/freq_GHz";
pub const SSIM_CORNER: &str = "alpha/phi_deg";

/// Header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Coordinates and values of a corner-headed table.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub corner: String,
    pub row_coords: Vec<f64>,
    pub col_coords: Vec<f64>,
    pub values: Array2<f64>,
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn table_to_string(t: &Table) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::validation(format!("csv encode: {e}"));
    w.write_record(&t.header).map_err(csv_err)?;
    for r in &t.rows {
        if r.len() != t.header.len() {
            return Err(Error::validation("table row width differs from header"));
        }
        w.write_record(r.iter().map(|v| fmt_num(*v))).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::validation(format!("csv encode: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::validation(e.to_string()))
}

pub fn write_table(path: &Path, t: &Table) -> Result<()> {
    write_atomic(path, table_to_string(t)?.as_bytes())
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text).map_err(|msg| Error::parse(path, msg))
}

fn parse_table(text: &str) -> std::result::Result<Table, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err("empty header".into());
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| format!("line {}: `{s}` is not a number", i + 2))
            })
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

impl Matrix {
    pub fn to_table(&self) -> Table {
        let mut header = vec![self.corner.clone()];
        header.extend(self.col_coords.iter().map(|c| fmt_num(*c)));
        let rows = self
            .row_coords
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = vec![*r];
                row.extend(self.values.row(i).iter());
                row
            })
            .collect();
        Table { header, rows }
    }

    pub fn from_table(t: &Table) -> std::result::Result<Self, String> {
        let corner = t.header[0].clone();
        let col_coords = t.header[1..]
            .iter()
            .map(|h| h.parse::<f64>().map_err(|_| format!("column header `{h}` is not a number")))
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        if col_coords.is_empty() || t.rows.is_empty() {
            return Err("matrix table needs at least one row and one column".into());
        }
        let nc = col_coords.len();
        let mut values = Array2::zeros((t.rows.len(), nc));
        let mut row_coords = Vec::with_capacity(t.rows.len());
        for (i, r) in t.rows.iter().enumerate() {
            row_coords.push(r[0]);
            for j in 0..nc {
                values[(i, j)] = r[j + 1];
            }
        }
        Ok(Self {
            corner,
            row_coords,
            col_coords,
            values,
        })
    }
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_table(path, &m.to_table())
}

pub fn read_matrix(path: &Path, corner: &str) -> Result<Matrix> {
    let t = read_table(path)?;
    if t.header[0] != corner {
        return Err(Error::parse(
            path,
            format!("corner cell is `{}`, expected `{corner}`", t.header[0]),
        ));
    }
    Matrix::from_table(&t).map_err(|m| Error::parse(path, m))
}

pub fn spectrum_table(s: &ComplexSpectrum) -> Table {
    let mut header = vec!["freq_GHz".to_string(), "amplitude_MHz".to_string()];
    if s.phase_rad.is_some() {
        header.push("phase_rad".into());
    }
    let rows = (0..s.len())
        .map(|i| {
            let mut r = vec![s.freq_ghz[i], s.amplitude_mhz[i]];
            if let Some(p) = &s.phase_rad {
                r.push(p[i]);
            }
            r
        })
        .collect();
    Table { header, rows }
}

pub fn write_spectrum(path: &Path, s: &ComplexSpectrum) -> Result<()> {
    write_table(path, &spectrum_table(s))
}

pub fn read_spectrum(path: &Path) -> Result<ComplexSpectrum> {
    let t = read_table(path)?;
    let h: Vec<&str> = t.header.iter().map(String::as_str).collect();
    let with_phase = match h.as_slice() {
        ["freq_GHz", "amplitude_MHz"] => false,
        ["freq_GHz", "amplitude_MHz", "phase_rad"] => true,
        _ => {
            return Err(Error::parse(
                path,
                format!(
                    "header `{}`, expected `freq_GHz,amplitude_MHz[,phase_rad]`",
                    t.header.join(",")
                ),
            ))
        }
    };
    let col = |k: usize| t.rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let s = ComplexSpectrum {
        freq_ghz: col(0),
        amplitude_mhz: col(1),
        phase_rad: with_phase.then(|| col(2)),
    };
    s.validate().map_err(|e| Error::parse(path, e))?;
    Ok(s)
}

pub fn spectrogram_matrix(s: &RabiSpectrogram) -> Matrix {
    Matrix {
        corner: SPECTROGRAM_CORNER.into(),
        row_coords: s.tau_us.clone(),
        col_coords: s.freq_ghz.clone(),
        values: s.signal.clone(),
    }
}

pub fn write_spectrogram(path: &Path, s: &RabiSpectrogram) -> Result<()> {
    write_matrix(path, &spectrogram_matrix(s))
}

pub fn read_spectrogram(path: &Path) -> Result<RabiSpectrogram> {
    let m = read_matrix(path, SPECTROGRAM_CORNER)?;
    RabiSpectrogram::new(m.row_coords, m.col_coords, m.values).map_err(|e| Error::parse(path, e))
}

pub fn write_fft(path: &Path, f: &FftSpectrum) -> Result<()> {
    write_matrix(
        path,
        &Matrix {
            corner: FFT_CORNER.into(),
            row_coords: f.rabi_mhz.clone(),
            col_coords: f.freq_ghz.clone(),
            values: f.magnitude.clone(),
        },
    )
}

pub fn read_fft(path: &Path) -> Result<FftSpectrum> {
    let m = read_matrix(path, FFT_CORNER)?;
    Ok(FftSpectrum {
        rabi_mhz: m.row_coords,
        freq_ghz: m.col_coords,
        magnitude: m.values,
    })
}

pub fn json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::validation(format!("json encode: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, json_string(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Circuit parameters from either a bare parameter object or any JSON object
/// holding one under `params` (fit reports, truth manifests).
pub fn read_params(path: &Path) -> Result<MbvdParams> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        Bare(MbvdParams),
        Wrapped { params: MbvdParams },
    }
    let p = match read_json::<Either>(path)? {
        Either::Bare(p) | Either::Wrapped { params: p } => p,
    };
    p.validate().map_err(|e| Error::parse(path, e))?;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Mode {
    #[default]
    #[serde(rename = "3.132GHz")]
    Mode3132,
    #[serde(rename = "2.732GHz")]
    Mode2732,
    #[serde(rename = "custom")]
    Custom,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3.132GHz" | "3.132" => Ok(Mode::Mode3132),
            "2.732GHz" | "2.732" => Ok(Mode::Mode2732),
            "custom" => Ok(Mode::Custom),
            other => Err(Error::validation(format!(
                "unknown mode `{other}`; expected 3.132GHz, 2.732GHz or custom"
            ))),
        }
    }
}

impl Mode {
    /// `(wavelength um, transition, circuit)` pinned by a preset.
    pub fn preset(self) -> Option<(f64, Transition, MbvdParams)> {
        match self {
            Mode::Mode3132 => Some((5.7, Transition::Plus, MbvdParams::mode_3132())),
            Mode::Mode2732 => Some((6.7, Transition::Minus, MbvdParams::mode_2732())),
            Mode::Custom => None,
        }
    }
}

/// `points` samples on `[start, stop]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.stop > self.start) {
            return Err(Error::validation(format!(
                "grid [{}, {}] x {} needs stop > start and >= 2 points",
                self.start, self.stop, self.points
            )));
        }
        Ok(crate::inference::linspace(self.start, self.stop, self.points))
    }

    pub fn centered(center: f64, half_span: f64, points: usize) -> Self {
        Self {
            start: center - half_span,
            stop: center + half_span,
            points,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub lead_sq: Option<PathBuf>,
    pub resonator_dq: Option<PathBuf>,
    pub spectrogram: Option<PathBuf>,
    pub params: Option<PathBuf>,
}

/// Everything a subcommand needs besides its own flags. Absent JSON fields
/// take the defaults below; `None` fields are filled from the mode preset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub transition: Option<Transition>,
    pub wavelength_um: Option<f64>,
    pub n_nv: usize,
    pub beta: f64,
    pub t2_us: f64,
    /// Fit window `[lo, hi]`, GHz. Default: preset resonance +- 10 linewidths.
    pub fit_window_ghz: Option<[f64; 2]>,
    /// Default: resonance +- 12 MHz, 25 columns.
    pub freq_grid_ghz: Option<GridSpec>,
    pub tau_grid_us: GridSpec,
    pub propagation: Propagation,
    pub taper: Taper,
    pub scan: ScanConfig,
    pub seed: u64,
    /// DQ stress susceptibility used to turn alpha into b', MHz/GPa.
    pub b_mhz_per_gpa: Measured,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::default(),
            transition: None,
            wavelength_um: None,
            n_nv: 6,
            beta: 1.3,
            t2_us: 2.0,
            fit_window_ghz: None,
            freq_grid_ghz: None,
            tau_grid_us: GridSpec {
                start: 0.0,
                stop: 4.0,
                points: 81,
            },
            propagation: Propagation::Secular,
            taper: Taper::Rectangular,
            scan: ScanConfig::default(),
            seed: 0,
            b_mhz_per_gpa: Measured::new(-2.3, 0.3),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn wavelength(&self) -> Result<f64> {
        match (self.wavelength_um, self.mode.preset()) {
            (Some(w), _) => Ok(w),
            (None, Some((w, _, _))) => Ok(w),
            (None, None) => Err(Error::validation("custom mode needs an explicit wavelength_um")),
        }
    }

    pub fn transition(&self) -> Result<Transition> {
        match (self.transition, self.mode.preset()) {
            (Some(t), _) => Ok(t),
            (None, Some((_, t, _))) => Ok(t),
            (None, None) => Err(Error::validation("custom mode needs an explicit transition")),
        }
    }

    pub fn ensemble(&self) -> Result<crate::spectro::EnsembleSpec> {
        crate::spectro::EnsembleSpec::new(self.n_nv, self.wavelength()?)
    }

    pub fn decoherence(&self) -> Result<DecoherenceParams> {
        DecoherenceParams::from_t2(self.t2_us)
    }

    pub fn fit_window(&self) -> Result<[f64; 2]> {
        let w = match (self.fit_window_ghz, self.mode.preset()) {
            (Some(w), _) => w,
            (None, Some((_, _, p))) => {
                let f = p.resonance_ghz();
                let half = 10.0 * f / p.quality_factor();
                [f - half, f + half]
            }
            (None, None) => return Err(Error::validation("custom mode needs fit_window_ghz")),
        };
        if !(w[1] > w[0]) {
            return Err(Error::validation(format!("fit window [{}, {}] is empty", w[0], w[1])));
        }
        Ok(w)
    }

    /// Drive-frequency grid, centred on the circuit's resonance by default.
    pub fn freq_grid(&self, circuit: &MbvdParams) -> Result<Vec<f64>> {
        self.freq_grid_ghz
            .unwrap_or_else(|| GridSpec::centered(circuit.resonance_ghz(), 0.012, 25))
            .values()
    }

    pub fn tau_grid(&self) -> Result<Vec<f64>> {
        let t = self.tau_grid_us.values()?;
        if t[0] < 0.0 || *t.last().unwrap() > crate::lindblad::MAX_TAU_US + 1e-12 {
            return Err(Error::validation(format!(
                "tau grid must lie within [0, {}] us",
                crate::lindblad::MAX_TAU_US
            )));
        }
        Ok(t)
    }

    pub fn circuit_preset(&self) -> Option<MbvdParams> {
        self.mode.preset().map(|p| p.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// First column on x, every other column a series.
    Line,
    /// Corner-headed matrix.
    Heatmap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub id: String,
    /// Relative to the manifest's directory.
    pub data_file: PathBuf,
    pub kind: PlotKind,
    pub x_label: String,
    pub y_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_label: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotManifest {
    pub figures: Vec<Figure>,
}

pub const MANIFEST_NAME: &str = "plots.json";

impl PlotManifest {
    /// Merge `figures` into the manifest in `dir`, replacing same-id entries.
    pub fn update(dir: &Path, figures: Vec<Figure>) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let mut m: PlotManifest = if path.exists() {
            read_json(&path)?
        } else {
            PlotManifest::default()
        };
        for f in figures {
            m.figures.retain(|g| g.id != f.id);
            m.figures.push(f);
        }
        m.figures.sort_by(|a, b| a.id.cmp(&b.id));
        m.validate(dir)?;
        write_json(&path, &m)?;
        Ok(m)
    }

    /// Every data file exists and parses for its plot kind.
    pub fn validate(&self, dir: &Path) -> Result<()> {
        for f in &self.figures {
            let p = dir.join(&f.data_file);
            match f.kind {
                PlotKind::Line => {
                    let t = read_table(&p)?;
                    if t.header.len() < 2 {
                        return Err(Error::parse(&p, "line plot needs x and at least one y column"));
                    }
                }
                PlotKind::Heatmap => {
                    let t = read_table(&p)?;
                    Matrix::from_table(&t).map_err(|m| Error::parse(&p, m))?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 3.1213e9, 0.0, -0.0, 1e300] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn table_rewrite_is_identical() {
        let t = Table {
            header: vec!["freq_GHz".into(), "amplitude_MHz".into()],
            rows: vec![vec![3.1, 1.0 / 7.0], vec![3.2, 2e-9]],
        };
        let s1 = table_to_string(&t).unwrap();
        let back = parse_table(&s1).unwrap();
        assert_eq!(back, t);
        assert_eq!(table_to_string(&back).unwrap(), s1);
    }

    #[test]
    fn bad_cells_are_named() {
        let e = parse_table("freq_GHz,amplitude_MHz\n3.1,abc\n").unwrap_err();
        assert!(e.contains("line 2") && e.contains("abc"), "{e}");
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"mode": "2.732GHz", "seed": 7}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.n_nv, 6);
        assert_eq!(c.wavelength().unwrap(), 6.7);
        assert_eq!(c.transition().unwrap(), Transition::Minus);
        let w = c.fit_window().unwrap();
        let f = MbvdParams::mode_2732().resonance_ghz();
        assert!(w[0] < f && f < w[1]);
    }

    #[test]
    fn custom_mode_needs_wavelength() {
        let c: RunConfig = serde_json::from_str(r#"{"mode": "custom"}"#).unwrap();
        assert!(matches!(c.wavelength(), Err(Error::Validation(_))));
        let c: RunConfig =
            serde_json::from_str(r#"{"mode": "custom", "wavelength_um": 6.0}"#).unwrap();
        assert_eq!(c.wavelength().unwrap(), 6.0);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"wavelength": 6.0}"#).is_err());
    }

    #[test]
    fn params_read_bare_or_wrapped() {
        let dir = tempfile::tempdir().unwrap();
        let p = MbvdParams::mode_3132();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        write_json(&a, &p).unwrap();
        write_json(&b, &serde_json::json!({"params": p, "alpha": 0.5})).unwrap();
        assert_eq!(read_params(&a).unwrap(), p);
        assert_eq!(read_params(&b).unwrap(), p);
    }
}
