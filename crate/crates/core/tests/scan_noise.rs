use sqdrive::inference::ScanConfig;
use sqdrive::io::{self, Mode, RunConfig};
use sqdrive::pipeline::{cmd_scan, cmd_synth, Context, ScanArgs, ScanReport, SynthArgs};

fn scan_at(noise: f64) -> ScanReport {
    let d = tempfile::tempdir().unwrap();
    let scan = ScanConfig {
        alpha_steps: 16,
        phi_steps: 19,
        refine: false,
        ..Default::default()
    };
    let ctx = Context {
        config: RunConfig {
            mode: Mode::Mode2732,
            scan,
            ..Default::default()
        },
        out_dir: d.path().into(),
    };
    cmd_synth(&ctx, &SynthArgs { params: None, alpha: 0.5, phi_deg: 10.0, noise }).unwrap();
    let data = d.path().join(sqdrive::pipeline::SPECTROGRAM_FILE);
    cmd_scan(&ctx, &ScanArgs { data: Some(data), params: None }).unwrap();
    io::read_json(&d.path().join(sqdrive::pipeline::SCAN_REPORT_FILE)).unwrap()
}

// Line cuts are min-max normalized, so the half width follows the shape of
// the similarity landscape and barely moves with noise; the peak value drops.
#[test]
fn peak_similarity_falls_with_noise_while_half_width_holds() {
    let reports: Vec<ScanReport> = [0.0, 0.05, 0.2].into_iter().map(scan_at).collect();
    for w in reports.windows(2) {
        assert!(w[1].peak.ssim < w[0].peak.ssim);
    }
    let base = &reports[0].uncertainty;
    for r in &reports {
        assert!((r.peak.alpha - 0.5).abs() <= r.uncertainty.d_alpha);
        assert!((r.uncertainty.d_alpha / base.d_alpha - 1.0).abs() < 0.25);
        assert!((r.uncertainty.d_phi_deg / base.d_phi_deg - 1.0).abs() < 0.25);
    }
}
