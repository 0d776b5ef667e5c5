//! `privcam`: simulate privacy-aware camera outputs from the command line.
//!
//! Exit codes: 0 success, 2 usage or out-of-domain argument, 3 I/O failure,
//! 4 unusable input data (including any failed item in a batch).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use privcam_core::{FillPolicy, Spacing, Split, Variant};

#[derive(Debug, Parser)]
#[command(name = "privcam", version, about = "Simulate defocus-blurred and grayscale camera outputs from RGB frames and stereo disparity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render one frame through the simulated camera.
    Simulate(SimulateArgs),
    /// Write a CoC-versus-depth CSV for one or more camera configurations.
    Curve(CurveArgs),
    /// Process a Cityscapes-layout dataset tree.
    Batch(BatchArgs),
    /// Report disparity validity and triangulated depth statistics.
    Inspect(InspectArgs),
}

/// Thin-lens camera parameters, units in the flag names.
#[derive(Debug, Args)]
struct LensArgs {
    /// Focal length in millimeters.
    #[arg(long, value_name = "MM", default_value_t = 80.0)]
    focal_length_mm: f64,
    /// Aperture f-number (dimensionless).
    #[arg(long, value_name = "N", default_value_t = 2.8)]
    f_number: f64,
    /// Sensor pixel pitch in micrometers.
    #[arg(long, value_name = "UM", default_value_t = 4.4)]
    pixel_size_um: f64,
    /// Focus distance in meters.
    #[arg(long, value_name = "M", default_value_t = 400.0)]
    focus_m: f64,
}

/// Stereo rig: a Cityscapes camera JSON or explicit values.
#[derive(Debug, Args)]
struct RigArgs {
    /// Camera sidecar JSON with intrinsic.fx (pixels) and extrinsic.baseline (meters).
    #[arg(long, value_name = "PATH", conflicts_with_all = ["fx_px", "baseline_m"])]
    camera_json: Option<PathBuf>,
    /// Rectified focal length in pixels.
    #[arg(long, value_name = "PX", requires = "baseline_m")]
    fx_px: Option<f64>,
    /// Stereo baseline in meters.
    #[arg(long, value_name = "M", requires = "fx_px")]
    baseline_m: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Input frame, 8-bit RGB PNG.
    #[arg(long, value_name = "PATH")]
    image: PathBuf,
    /// Disparity map: 16-bit PNG (Cityscapes encoding, pixels) or 32-bit float TIFF (pixels).
    #[arg(long, value_name = "PATH", conflicts_with = "depth")]
    disparity: Option<PathBuf>,
    /// Metric depth map, 32-bit float TIFF in meters; zero or non-finite marks missing pixels.
    #[arg(long, value_name = "PATH")]
    depth: Option<PathBuf>,
    #[command(flatten)]
    rig: RigArgs,
    #[command(flatten)]
    lens: LensArgs,
    /// Output variant: C (copy), G (grayscale), B (defocus blur), BG (blur then grayscale).
    #[arg(long, value_name = "C|G|B|BG", default_value = "B")]
    variant: Variant,
    /// Number of depth layers (count).
    #[arg(long, value_name = "COUNT", default_value_t = 32)]
    k: usize,
    /// Fill policy for missing depth: nearest_layer_max_blur or nearest_neighbor.
    #[arg(long, value_name = "POLICY", default_value = "nearest_layer_max_blur")]
    fill_policy: FillPolicy,
    /// Output image path, 8-bit RGB PNG (G and BG write three equal channels).
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CurveArgs {
    /// Camera JSON (focal_length_mm, f_number, pixel_size_um, focus_m, optional description),
    /// or a job config with a "camera" block. Repeat for one column per camera.
    /// Without any, the 80 mm and 60 mm presets (f/2.8, 4.4 um, focus 400 m) are used.
    #[arg(long = "config-json", value_name = "PATH")]
    config_json: Vec<PathBuf>,
    /// Nearest depth in meters.
    #[arg(long, value_name = "M", default_value_t = 1.0)]
    z_min: f64,
    /// Farthest depth in meters.
    #[arg(long, value_name = "M", default_value_t = 600.0)]
    z_max: f64,
    /// Number of depth samples (rows, count).
    #[arg(long, value_name = "COUNT", default_value_t = 200)]
    samples: usize,
    /// Depth sampling: log or linear.
    #[arg(long, value_name = "log|linear", default_value = "log")]
    spacing: Spacing,
    /// Output CSV path (columns z_m then CoC in pixels); stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BatchArgs {
    /// Dataset root containing leftImg8bit/, disparity/ and camera/.
    #[arg(long, value_name = "DIR")]
    root: PathBuf,
    /// Job config JSON (camera in mm/um/m, variant, k, fill_policy, grayscale_weights, rig, jobs).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Worker threads (count); overrides the config's jobs.
    #[arg(long, value_name = "COUNT")]
    jobs: Option<usize>,
    /// Output directory for images, manifest.jsonl and run.json.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Comma-separated splits to process.
    #[arg(long, value_name = "SPLITS", value_delimiter = ',', default_value = "train,val,test")]
    splits: Vec<Split>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    /// Disparity map: 16-bit PNG (Cityscapes encoding) or 32-bit float TIFF (pixels).
    #[arg(long, value_name = "PATH")]
    disparity: PathBuf,
    #[command(flatten)]
    rig: RigArgs,
    /// Number of log-spaced depth histogram bins (count).
    #[arg(long, value_name = "COUNT", default_value_t = 12)]
    bins: usize,
    /// Emit the report as JSON instead of text.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Curve(a) => commands::curve(a),
        Command::Batch(a) => commands::batch(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("privcam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
