//! Drive an external model runner over the line-delimited JSON bridge.
//!
//! ```text
//! cargo run --example bridge_client -- "python3 runner.py" image.png
//! ```

use std::path::Path;

use memprompt::backend::{select_best, Backend, BridgeBackend, BridgeParams};
use memprompt::prompt::{PointPrompt, PromptSet};
use memprompt::tensor_io::Pixel;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [command, image] = args.as_slice() else {
        eprintln!("usage: bridge_client RUNNER_COMMAND IMAGE");
        std::process::exit(1);
    };
    if let Err(e) = run(command, Path::new(image)) {
        eprintln!("error: {e}");
        if let memprompt::Error::Backend { transcript, .. } = &e {
            for line in transcript {
                eprintln!("  | {line}");
            }
        }
        std::process::exit(e.exit_code());
    }
}

fn run(command: &str, image: &Path) -> memprompt::Result<()> {
    let backend = BridgeBackend::new(BridgeParams { timeout_secs: 60, ..BridgeParams::new(command) })?;
    let grid = backend.extract_features(image)?;
    let (h, w) = grid.source_dims();
    println!("features {}x{} x{} for a {w}x{h} image", grid.rows(), grid.cols(), grid.dim());

    let prompts = PromptSet {
        points: vec![
            PointPrompt::foreground(Pixel::new(w / 2, h / 2)),
            PointPrompt::background(Pixel::new(0, 0)),
        ],
    };
    let masks = backend.segment(image, &prompts)?;
    for (i, m) in masks.iter().enumerate() {
        println!("mask {i}: score {:.3}, {} px", m.score, m.mask.foreground_count());
    }
    println!("best covers {} px", select_best(&masks)?.foreground_count());
    Ok(())
}
