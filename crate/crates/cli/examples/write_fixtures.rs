//! Regenerates the problem files under `fixtures/`.

use procdisc::instances::two_use_instance;
use procdisc::process::{ChoiProcess, DiscriminationInstance, Role};
use procdisc::strategy::StrategyClass;
use procdisc::{Hermitian, SystemLayout, C64};
use procdisc_cli::{ProblemFile, SolverSettings};

fn state_comb(amplitudes: [C64; 2]) -> ChoiProcess {
    let v = procdisc::hermitian::CMatrix::from_column_slice(2, 1, &amplitudes);
    let m = Hermitian::new(&v * v.adjoint()).unwrap();
    ChoiProcess::new(m, SystemLayout::new(vec![2, 1]).unwrap(), Role::CombCandidate).unwrap()
}

fn main() -> procdisc::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let example = ProblemFile::from_instance(&two_use_instance()?, &StrategyClass::SequentialTwoStep, SolverSettings::default())?;
    std::fs::write(dir.join("paper-example.json"), example.to_json() + "\n")?;

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = state_comb([C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let plus = state_comb([C64::new(h, 0.0), C64::new(h, 0.0)]);
    let inst = DiscriminationInstance::new(vec![zero, plus], vec![0.5, 0.5], 1)?;
    let helstrom = ProblemFile::from_instance(&inst, &StrategyClass::Global, SolverSettings::default())?;
    std::fs::write(dir.join("helstrom.json"), helstrom.to_json() + "\n")?;
    Ok(())
}
