//! Built-in problems.

/// `(name, summary, source)`.
pub const BUILTINS: [(&str, &str, &str); 5] = [
    ("mivop3", "two LU-convex objectives on the positive orthant, five constraints", MIVOP3),
    ("mivop4", "pseudo-convex objectives that are not LU-convex, five constraints", MIVOP4),
    ("mivop5", "objectives of ln det on 2x2 SPD matrices, gH form", MIVOP5),
    ("hderiv_counterexample", "(1 - p^3)[-1, 4]: gH derivative exists, H derivative does not", HDERIV),
    ("relaxed_mivop3", "mivop3 without psi2 and psi5; (1,1) is no longer optimal", RELAXED_MIVOP3),
];

pub fn source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _, _)| *n == name).map(|(_, _, s)| *s)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _, _)| *n)
}

// The feasible sets of the first three problems are single points, so
// probes are taken from the whole box.

const MIVOP3: &str = "\
manifold log_orthant 2
box 0.5:1.5,0.5:1.5
probes box
objective phi1 lower=ln(p1) + 3 upper=ln(p1) + 5
objective phi2 lower=p1^2 + p2^2 + 2 upper=p1^2 + p2^2 + 7
constraint psi1 ln(p1) + sqrt(p2) - 1
constraint psi2 -ln(p1)
constraint psi3 p1 + p2 - 2
constraint psi4 p1^2*p2 - 7
constraint psi5 -ln(p2)
candidate (1,1)
certificate theorem=T32a lamL=1,1 lamU=1,1 mu=1,7,0,0,4.5
";

const MIVOP4: &str = "\
manifold log_orthant 2
box 0.5:1.5,0.5:1.5
probes box
objective phi1 lower=(ln(p1)^2 + ln(p2)^2)/(1 + ln(p1)^2 + ln(p2)^2) upper=(ln(p1)^2 + ln(p2)^2)/(1 + ln(p1)^2 + ln(p2)^2) + 1
objective phi2 lower=ln(p1)^2 + p2 upper=ln(p1)^2 + p2 + 1
constraint psi1 ln(p1)^2 + ln(p2)^2 - 1
constraint psi2 p1*ln(p2)^2 + p2*ln(p1)^2 - 3
constraint psi3 1/p1 + ln(p2)^2 - 1
constraint psi4 p1^2 + p2^2 - 2
constraint psi5 ln(p1)^2 + 1/p2 - 1
candidate (1,1)
# phi1 fails LU-convexity on this geodesic midpoint.
anchor p=(1,1) q=(exp(2),exp(2)) alpha=0.5
certificate theorem=T34a lamL=1,1 lamU=1,1 muL=0,0,2,1,3 muU=0,0,2,1,3
";

const MIVOP5: &str = "\
# Coordinates: a11, a22, a12. The box keeps det >= 0.5.
manifold spd 2
box 0.75:1.25,0.75:1.25,-0.25:0.25
probes box
objective phi1 lower=ldet upper=ldet + 1
objective phi2 lower=ldet^2 upper=ldet^2 + 1
constraint psi1 1/(1 + ldet)^2 - 1
constraint psi2 -ldet - 3
constraint psi3 sqrt(3 + ldet^2) - sqrt(3)
candidate sym[1,0,1]
certificate theorem=T41 lam=2,1 mu=1,0,1
";

const HDERIV: &str = "\
# phi(p) = (1 - p^3)[-1, 4] written with endpoint functions.
manifold euclidean 1
box -1:1
objective phi lower=(3*(1 - p1^3) - 5*abs(1 - p1^3))/2 upper=(3*(1 - p1^3) + 5*abs(1 - p1^3))/2
candidate (0)
";

const RELAXED_MIVOP3: &str = "\
manifold log_orthant 2
box 0.5:1.5,0.5:1.5
objective phi1 lower=ln(p1) + 3 upper=ln(p1) + 5
objective phi2 lower=p1^2 + p2^2 + 2 upper=p1^2 + p2^2 + 7
constraint psi1 ln(p1) + sqrt(p2) - 1
constraint psi3 p1 + p2 - 2
constraint psi4 p1^2*p2 - 7
candidate (1,1)
# The mivop3 multipliers restricted to the remaining constraints; does not verify.
certificate theorem=T32a lamL=1,1 lamU=1,1 mu=1,0,0
";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_loads() {
        for name in names() {
            let pf = crate::problem::load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(pf.candidate.is_some(), "{name}");
        }
    }
}
