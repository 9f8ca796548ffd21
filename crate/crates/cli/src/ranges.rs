//! `start:step:stop` axis ranges, mirroring the notation used to describe
//! sweep experiments. A bare number is a single-point axis.

use crate::error::CliError;

pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Validation(format!("range '{text}': {why}"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => {
            let v: f64 = single
                .trim()
                .parse()
                .map_err(|_| bad("not a number"))?;
            Ok(vec![v])
        }
        [start, step, stop] => {
            let start: f64 = start.trim().parse().map_err(|_| bad("bad start"))?;
            let step: f64 = step.trim().parse().map_err(|_| bad("bad step"))?;
            let stop: f64 = stop.trim().parse().map_err(|_| bad("bad stop"))?;
            if !(step > 0.0) {
                return Err(bad("step must be positive"));
            }
            if stop < start {
                return Err(bad("stop below start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|k| start + k as f64 * step).collect())
        }
        _ => Err(bad("expected VALUE or START:STEP:STOP")),
    }
}
