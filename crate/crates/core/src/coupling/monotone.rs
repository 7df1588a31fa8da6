use serde::{Deserialize, Serialize};

use crate::engine::{Configuration, Engine, ParticleId, RandomSource};
use crate::error::{invalid, Result};
use crate::infection::{InfectionSetup, InfectionState};
use crate::lattice::{JumpDistribution, Site};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneOutcome {
    pub checks: u64,
    /// Sites and times where the sparser system had more particles.
    pub domination_violations: u64,
    /// Particles infected in the sparser system but healthy in the denser one.
    pub infection_violations: u64,
    pub particles_low: usize,
    pub particles_high: usize,
    pub infected_low: usize,
    pub infected_high: usize,
    pub identical: bool,
}

/// Two systems on one graphical construction: `eta'` is a thinning of `eta`
/// and both follow the same walks. Domination is checked at every sample time.
pub fn run_monotone(
    law: &JumpDistribution,
    rho_low: f64,
    rho_high: f64,
    horizon: f64,
    sample_dt: f64,
    source: &RandomSource,
) -> Result<MonotoneOutcome> {
    if !(0.0..=rho_high).contains(&rho_low) {
        return Err(invalid("rho_low", format!("need 0 <= {rho_low} <= {rho_high}")));
    }
    let mut setup = InfectionSetup::new(law.clone(), rho_high, horizon);
    setup.sample_dt = sample_dt;
    setup.validate()?;
    let window = setup.window()?;
    let o = Site::origin(law.dim());
    let high = Configuration::poisson(rho_high, &window, window, source)?.with_particle(ParticleId::extra_at(o), o)?;
    let keep = if rho_high > 0.0 { rho_low / rho_high } else { 1.0 };
    let low = high.thinned(keep, source)?;
    let walks = source.derive_label("walks");
    let mut hi_st = InfectionState::seed(&high);
    let mut lo_st = InfectionState::seed(&low);
    let mut hi = Engine::new(law, high, &walks)?;
    let mut lo = Engine::new(law, low, &walks)?;
    let mut out = MonotoneOutcome {
        checks: 0,
        domination_violations: 0,
        infection_violations: 0,
        particles_low: lo.config().len(),
        particles_high: hi.config().len(),
        infected_low: 0,
        infected_high: 0,
        identical: true,
    };
    let check = |hi: &Engine, lo: &Engine, hi_st: &InfectionState, lo_st: &InfectionState, out: &mut MonotoneOutcome| {
        out.checks += 1;
        let (h, l) = (hi.config(), lo.config());
        for (site, n) in l.occupied() {
            if n > h.count(&site) {
                out.domination_violations += 1;
            }
        }
        for slot in 0..l.len() {
            if lo_st.is_infected(slot) {
                let other = h.slot_of(&l.id(slot)).expect("thinning keeps identities");
                if !hi_st.is_infected(other) {
                    out.infection_violations += 1;
                }
            }
        }
        out.identical &= l.len() == h.len() && l.positions() == h.positions();
    };
    check(&hi, &lo, &hi_st, &lo_st, &mut out);
    for t in setup.sample_times() {
        hi.evolve(t, |ev, c| hi_st.propagate(ev, c).expect("engine events are consistent"));
        lo.evolve(t, |ev, c| lo_st.propagate(ev, c).expect("engine events are consistent"));
        check(&hi, &lo, &hi_st, &lo_st, &mut out);
    }
    out.infected_low = lo_st.infected_count();
    out.infected_high = hi_st.infected_count();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> JumpDistribution {
        JumpDistribution::one_dim(0.25).unwrap()
    }

    #[test]
    fn equal_densities_give_identical_systems() {
        let o = run_monotone(&law(), 1.0, 1.0, 20.0, 1.0, &RandomSource::new(1)).unwrap();
        assert!(o.identical);
        assert_eq!(o.infected_low, o.infected_high);
    }

    #[test]
    fn zero_lower_density_leaves_only_the_seed() {
        let o = run_monotone(&law(), 0.0, 1.0, 20.0, 1.0, &RandomSource::new(2)).unwrap();
        assert_eq!(o.particles_low, 1);
        assert_eq!(o.infected_low, 1);
    }

    #[test]
    fn no_violations() {
        for r in 0..30 {
            let o = run_monotone(&law(), 0.5, 1.0, 50.0, 1.0, &RandomSource::new(3).replica(r)).unwrap();
            assert_eq!(o.domination_violations, 0);
            assert_eq!(o.infection_violations, 0);
            assert!(o.infected_low <= o.infected_high);
        }
    }

    #[test]
    fn rejects_inverted_densities() {
        assert!(run_monotone(&law(), 2.0, 1.0, 5.0, 1.0, &RandomSource::new(1)).is_err());
    }
}
