//! Randomized invariants across modules.

use innervar::analysis;
use innervar::energies::{self, FModel};
use innervar::field::{self, ComplexField, Scheme};
use innervar::io;
use innervar::structure::{self, extend, OperatorConstants, StructureSpec};
use innervar::transforms;
use innervar::{Complex64 as C64, GridSpec, Region};
use proptest::prelude::*;
use std::sync::OnceLock;

fn consts() -> &'static OperatorConstants {
    static C: OnceLock<OperatorConstants> = OnceLock::new();
    C.get_or_init(|| OperatorConstants::defaults(1.0).unwrap())
}

fn cplx(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| C64::new(a, b))
}

// (1 - r^2/w^2)^4 inside the disk of radius w, zero outside
fn bump(center: C64, width: f64) -> impl Fn(C64) -> C64 + Sync {
    move |z| {
        let r2 = (z - center).norm_sqr() / (width * width);
        C64::new(if r2 < 1.0 { (1.0 - r2).powi(4) } else { 0.0 }, 0.0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn central2_exact_on_affine_maps(a in cplx(3.0), b in cplx(3.0), c in cplx(3.0)) {
        let g = GridSpec::new(1.0, 32).unwrap();
        let f = field::sample(g, move |z| a + b * z + c * z.conj(), None).unwrap();
        let pair = field::wirtinger(&f, Scheme::Central2).unwrap();
        for (i, _) in pair.d_z.active() {
            prop_assert!((pair.d_z.values()[i] - b).norm() < 1e-12);
            prop_assert!((pair.d_zbar.values()[i] - c).norm() < 1e-12);
        }
    }

    #[test]
    fn analytic_maps_preserve_orientation(c in prop::collection::vec(cplx(1.0), 4)) {
        let g = GridSpec::new(1.0, 64).unwrap();
        let f = field::sample(g, move |z| c[0] + c[1] * z + c[2] * z * z + c[3] * z * z * z, None).unwrap();
        let jac = field::jacobian(&field::wirtinger(&f, Scheme::Central4).unwrap());
        for (i, v) in jac.values().iter().enumerate() {
            if !jac.is_excluded(i) {
                prop_assert!(*v >= -1e-8, "J = {v}");
            }
        }
    }

    #[test]
    fn lp_norms_of_constants(c in cplx(5.0), p in 1.0f64..8.0) {
        let g = GridSpec::new(1.0, 32).unwrap();
        let f = field::sample(g, move |_| c, None).unwrap();
        let region = Region::Plane;
        let sup = field::lp_norm(&f, f64::INFINITY, &region).unwrap();
        let lp = field::lp_norm(&f, p, &region).unwrap();
        let area = g.len() as f64 * g.cell_area();
        prop_assert!(sup + 1e-12 >= lp / area.powf(1.0 / p));
        prop_assert!((sup - lp / area.powf(1.0 / p)).abs() <= 1e-10 * sup.max(1.0));
    }

    #[test]
    fn besov_seminorm_is_translation_invariant(center in cplx(0.5), dj in -3i64..3, dk in -3i64..3) {
        let g = GridSpec::new(4.0, 64).unwrap();
        let w = field::sample(g, bump(center, 0.5), None).unwrap().into_supported().unwrap();
        let shifted = w.shifted(dj, dk);
        let a = field::besov_seminorm(&w, 1.0, 3.0).unwrap();
        let b = field::besov_seminorm(&shifted, 1.0, 3.0).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn cauchy_vanishes_at_origin(center in cplx(0.7), width in 0.15f64..0.5) {
        let g = GridSpec::new(4.0, 64).unwrap();
        let w = field::sample(g, bump(center, width), None).unwrap().into_supported().unwrap();
        let f = transforms::cauchy(&w).unwrap();
        prop_assert!(f.values()[g.origin_index()].norm() < 1e-10 * f.max_abs());
    }

    #[test]
    fn lambda_zero_lower_bounds(a in cplx(20.0), b in cplx(20.0), r in 0.1f64..10.0) {
        prop_assume!(a.norm() > 1e-6);
        let spec = StructureSpec::rational(a, b, Some(r)).unwrap();
        let c = consts();
        let l0 = structure::lambda_zero(&spec, c);
        prop_assert!(l0 >= 4.0);
        prop_assert!(l0 >= 3.0 * spec.r());
        prop_assert!(l0 * l0 >= 8.0 * c.s_p * spec.l());
    }

    #[test]
    fn extension_keeps_constants(a in cplx(10.0), b in cplx(10.0), seed in 0u64..1000) {
        prop_assume!(a.norm() > 1e-3);
        let spec = StructureSpec::rational(a, b, None).unwrap();
        let rep = structure::verify_extension(&extend(&spec), 500, seed);
        prop_assert!(rep.passed(), "{}", rep.summary());
    }

    #[test]
    fn winding_is_stable_under_small_shifts(r in 0.5f64..5.0, v in cplx(0.4), shift in cplx(1.0), m in 256usize..1024) {
        let samples: Vec<C64> = (0..m).map(|j| C64::from_polar(r, std::f64::consts::TAU * j as f64 / m as f64)).collect();
        let w = analysis::winding_of_samples(&samples, v * r).unwrap();
        prop_assert_eq!(w.degree, 1);
        prop_assert!(w.certified);
        let moved = v * r + shift * (0.49 * w.min_modulus / shift.norm().max(1.0));
        let w2 = analysis::winding_of_samples(&samples, moved).unwrap();
        prop_assert_eq!(w2.degree, w.degree);
    }

    #[test]
    fn invert_k_round_trips(p in 1.0f64..3.0, t in 0.0f64..1.0) {
        let f = FModel::power_sum(p).unwrap();
        let w = energies::k_window(&f).unwrap();
        let s = t * w.s0;
        let k = energies::invert_k_in(&f, &w, s).unwrap();
        prop_assert!((0.0..=w.k0).contains(&k));
        prop_assert!((f.phi_k(k).0 - s).abs() < 1e-10);
    }

    #[test]
    fn recovered_hzbar_balances(p in 1.0f64..3.0, phi in cplx(1.0), hz in cplx(4.0)) {
        prop_assume!(hz.norm() > 1.5 && phi.norm() > 1e-3);
        let f = FModel::power_sum(p).unwrap();
        let w = energies::k_window(&f).unwrap();
        prop_assume!(phi.norm() / hz.norm_sqr() <= w.s0);
        let hzb = energies::recover_hzbar(&f, phi, hz).unwrap();
        let k = hzb.norm() / hz.norm();
        let e = f.eval(1.0, k * k);
        let lhs = (e.fa + e.fb) / (1.0 - k * k).powf(p - 1.0) * hzb.conj() / hz;
        let rhs = phi / (hz * hz);
        prop_assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1e-300), "{lhs} vs {rhs}");
    }

    #[test]
    fn cf64_round_trip_is_bit_exact(
        vals in prop::collection::vec((any::<f64>(), any::<f64>()), 256),
        mask in prop::collection::vec(any::<bool>(), 256),
        with_mask in any::<bool>(),
        a in 0.1f64..10.0,
    ) {
        let g = GridSpec::new(a, 16).unwrap();
        let mask = with_mask.then_some(mask);
        let values: Vec<C64> = vals
            .iter()
            .enumerate()
            .map(|(i, &(re, im))| {
                let excluded = mask.as_ref().map_or(false, |m| m[i]);
                if excluded || (re.is_finite() && im.is_finite()) { C64::new(re, im) } else { C64::new(1.0, -1.0) }
            })
            .collect();
        let f = match ComplexField::from_parts(g, values, mask) {
            Ok(f) => f,
            Err(_) => return Ok(()),
        };
        let mut buf = Vec::new();
        io::write_cf64(&mut buf, &f).unwrap();
        let back = io::read_cf64(&buf[..]).unwrap();
        let bits = |f: &ComplexField| f.values().iter().map(|v| (v.re.to_bits(), v.im.to_bits())).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&f));
        prop_assert_eq!(back.mask(), f.mask());
        prop_assert_eq!(back.grid(), f.grid());
    }
}
