//! Coordinate-geometry construction of the four-bar, independent of the cosine-law solver.
#![allow(dead_code)]

use limbkin_core::LinkageGeometry;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct V(pub f64, pub f64);

impl V {
    fn sub(self, o: V) -> V {
        V(self.0 - o.0, self.1 - o.1)
    }
    fn norm(self) -> f64 {
        self.0.hypot(self.1)
    }
    fn cross(self, o: V) -> f64 {
        self.0 * o.1 - self.1 * o.0
    }
    fn dot(self, o: V) -> f64 {
        self.0 * o.0 + self.1 * o.1
    }
}

/// Signed angle rotating `u` onto `v`.
fn signed_angle(u: V, v: V) -> f64 {
    u.cross(v).atan2(u.dot(v))
}

#[derive(Debug, Clone, Copy)]
pub struct Construction {
    pub a: V,
    pub b: V,
    pub c: V,
    pub d: V,
    pub l_ac: f64,
    pub angle_bac: f64,
    pub angle_dac: f64,
    pub theta_b: f64,
    pub theta_c: f64,
}

/// Places A at the origin, D on the ground link, C from the angle at D and B on
/// the side of AC away from D. Returns `None` when the circles about A and C miss.
pub fn construct(g: &LinkageGeometry, theta_l: f64) -> Option<Construction> {
    let a = V(0.0, 0.0);
    let phi = -(theta_l + g.theta_ins);
    let d = V(g.l_ad * phi.cos(), g.l_ad * phi.sin());
    let angle_d = std::f64::consts::PI - theta_l - g.theta_ins;
    // Rotate the direction D→A by the angle at D.
    let da = a.sub(d);
    let u = V(da.0 / g.l_ad, da.1 / g.l_ad);
    let (s, co) = angle_d.sin_cos();
    let c = V(d.0 + g.l_cd * (u.0 * co - u.1 * s), d.1 + g.l_cd * (u.0 * s + u.1 * co));
    let ac = c.sub(a);
    let l_ac = ac.norm();
    // Circle-circle intersection about A (radius lAB) and C (radius lBC).
    let x = (g.l_ab * g.l_ab - g.l_bc * g.l_bc + l_ac * l_ac) / (2.0 * l_ac);
    let y2 = g.l_ab * g.l_ab - x * x;
    if y2 < 0.0 {
        return None;
    }
    let e = V(ac.0 / l_ac, ac.1 / l_ac);
    let n = V(-e.1, e.0);
    let side_d = ac.cross(d.sub(a)).signum();
    let y = -side_d * y2.sqrt();
    let b = V(x * e.0 + y * n.0, x * e.1 + y * n.1);
    let angle_bac = signed_angle(ac, b.sub(a)).abs();
    let angle_dac = signed_angle(ac, d.sub(a)).abs();
    let theta_b = signed_angle(a.sub(b), c.sub(b)).abs();
    let acb = signed_angle(a.sub(c), b.sub(c));
    let acd = signed_angle(d.sub(c), a.sub(c));
    assert!(acb * acd >= 0.0, "B and D must straddle AC");
    Some(Construction { a, b, c, d, l_ac, angle_bac, angle_dac, theta_b, theta_c: acb.abs() + acd.abs() })
}

/// Random geometry around the reference with every triangle angle in [2°, 178°].
pub fn random_feasible_sample<R: Rng>(rng: &mut R) -> (LinkageGeometry, f64) {
    let lo = 2f64.to_radians();
    let hi = 178f64.to_radians();
    loop {
        let g = LinkageGeometry {
            l_ad: rng.gen_range(0.06..0.16),
            l_ab: rng.gen_range(0.06..0.18),
            l_bc: rng.gen_range(0.06..0.20),
            l_cd: rng.gen_range(0.08..0.26),
            theta_ins: rng.gen_range(0.2..2.6),
            ..LinkageGeometry::reference()
        };
        let theta_l = rng.gen_range(g.theta_dn..=g.theta_up);
        let Some(k) = construct(&g, theta_l) else { continue };
        let abc_c = std::f64::consts::PI - k.angle_bac - k.theta_b;
        let ad = std::f64::consts::PI - theta_l - g.theta_ins;
        let angles = [k.angle_bac, k.theta_b, abc_c, k.angle_dac, ad];
        if angles.iter().all(|a| (lo..=hi).contains(a)) {
            return (g, theta_l);
        }
    }
}
