//! Batch front-end for `latentlab-core`: one subcommand per pipeline stage plus
//! a `pipeline` command chaining them over a dataset directory.

pub mod args;
pub mod commands;
pub mod pipeline;
pub mod synth;

use anyhow::Result;

use args::{Cli, Command};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Split(a) => commands::split(cfg, a),
        Command::Manifest(a) => commands::manifest(a),
        Command::Mix(a) => commands::mix(cfg, a),
        Command::Voxelize(a) => commands::voxelize(cfg, a),
        Command::Bevpool(a) => commands::bevpool(cfg, a),
        Command::Project(a) => commands::project(cfg, a),
        Command::Boxes(a) => commands::boxes(cfg, a),
        Command::Heatmap(a) => commands::heatmap(cfg, a),
        Command::Decode(a) => commands::decode(cfg, a),
        Command::Eval(a) => commands::eval(cfg, a),
        Command::Loss(a) => commands::loss(cfg, a),
        Command::Pipeline(a) => {
            let mut c = commands::load_config(cfg)?;
            commands::overlay(&mut c, "data_dir", a.data.as_ref().map(|p| p.display()))?;
            commands::overlay(&mut c, "out_dir", a.out.as_ref().map(|p| p.display()))?;
            commands::overlay(&mut c, "ratio", a.ratio)?;
            commands::overlay(&mut c, "seed", a.seed)?;
            commands::overlay(&mut c, "image_size", a.image_size.as_ref())?;
            commands::overlay(&mut c, "view", a.view)?;
            commands::overlay(&mut c, "p_cylmix", a.p)?;
            commands::finish_config(&c)?;
            let s = pipeline::run_pipeline(&c, a.jobs, a.resume)?;
            log::info!(
                "{} frames, {} labeled, {} mixed pairs, {} items resumed",
                s.frames,
                s.labeled,
                s.pairs,
                s.skipped
            );
            Ok(())
        }
        Command::Synth(a) => synth::write_dataset(&a.out, a.frames, a.points, a.seed),
    }
}
