use faer::Mat;
use proptest::prelude::*;
use symneg_core::asymptotics::{classify_phase, mutual_information_u1, ClassifyOptions, ThermoPoint};
use symneg_core::ensemble::{build_rho, sample_block};
use symneg_core::linalg::hermitian_eigenvalues;
use symneg_core::negativity::{decompose_pt, partial_transpose, pt_spectrum, transpose_a2, PtLayout};
use symneg_core::resolvent::{criticality_flags, semicircle_components};
use symneg_core::sectors::{
    basis_strings, born_weights, digits_of, enumerate_pt_pairs, sector_dim, SectorGeometry, Symmetry, SymmetryKind,
};

fn symmetry(kind: u8) -> Symmetry {
    match kind {
        0 => Symmetry::zr(2).unwrap(),
        1 => Symmetry::zr(3).unwrap(),
        2 => Symmetry::zr(4).unwrap(),
        _ => Symmetry::u1(),
    }
}

/// Small nonempty geometries, sized so that dense checks stay cheap.
fn small_geometry() -> impl Strategy<Value = SectorGeometry> {
    (0u8..4, 1usize..=3, 1usize..=3, 1usize..=3, any::<u32>()).prop_filter_map("nonempty", |(k, a1, a2, b, pick)| {
        let sym = symmetry(k);
        if (sym.r() as usize).pow((a1 + a2) as u32) > 64 {
            return None;
        }
        let n = a1 + a2 + b;
        let total = match sym.kind() {
            SymmetryKind::U1 => (pick as usize % (n + 1)) as i64,
            SymmetryKind::Zr => (pick % sym.r()) as i64,
        };
        let qs = sym.charges(a1 + a2);
        let q_a = qs[(pick as usize >> 8) % qs.len()];
        SectorGeometry::new(sym, a1, a2, b, total, q_a).ok()
    })
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sector_dimensions_count_basis_strings(k in 0u8..4, n in 1usize..=6) {
        let sym = symmetry(k);
        let mut total = 0u64;
        for q in sym.charges(n) {
            let strings = basis_strings(sym, n, q).unwrap();
            prop_assert_eq!(strings.len() as u64, sector_dim(sym, n, q).unwrap());
            for s in strings {
                prop_assert_eq!(sym.string_charge(&digits_of(s, sym.r(), n)), q);
            }
            total += sector_dim(sym, n, q).unwrap();
        }
        prop_assert_eq!(total, (sym.r() as u64).pow(n as u32));
    }

    #[test]
    fn born_weights_sum_to_one(k in 0u8..4, na in 1usize..=6, nb in 1usize..=6, q in 0i64..6) {
        let sym = symmetry(k);
        if let Ok(w) = born_weights(sym, na, nb, sym.canonical(q)) {
            prop_assert!((w.values().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.values().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn partial_transpose_is_a_trace_preserving_involution(g in small_geometry(), seed in any::<u64>()) {
        let rho = build_rho(&sample_block(&g, 0, seed).unwrap(), true).unwrap();
        let pt = partial_transpose(&rho).unwrap();
        prop_assert!((pt.trace() - 1.0).abs() < 1e-12);
        let back = transpose_a2(&pt).unwrap();
        let orig = symneg_core::negativity::embed(&rho).unwrap();
        let diff = &back.matrix - &orig.matrix;
        prop_assert!(symneg_core::linalg::max_abs(diff.as_ref()) < 1e-14);
    }

    #[test]
    fn block_decomposition_matches_dense_spectrum(g in small_geometry(), seed in any::<u64>()) {
        let rho = build_rho(&sample_block(&g, 1, seed).unwrap(), true).unwrap();
        let dense = sorted(partial_transpose(&rho).unwrap().eigenvalues().unwrap());
        let s = pt_spectrum(&rho).unwrap();
        let mut blocks: Vec<f64> = s.eigenvalues.iter().map(|e| e.0).collect();
        blocks.extend(std::iter::repeat(0.0).take(s.zero_modes));
        let blocks = sorted(blocks);
        prop_assert_eq!(blocks.len(), PtLayout::new(&g).unwrap().dim());
        // Paired blocks come from singular values, so zeros are resolved to ~sqrt(eps).
        for (a, b) in dense.iter().zip(&blocks) {
            prop_assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        prop_assert!(s.negativity() >= -1e-15);
        prop_assert!((s.trace_norm() - (1.0 + 2.0 * s.negativity())).abs() < 1e-12);
    }

    #[test]
    fn reassembled_blocks_equal_the_transpose(g in small_geometry(), seed in any::<u64>()) {
        let rho = build_rho(&sample_block(&g, 2, seed).unwrap(), false).unwrap();
        let layout = PtLayout::new(&g).unwrap();
        let m = decompose_pt(&rho).unwrap().reassemble(&layout).unwrap();
        let pt = partial_transpose(&rho).unwrap();
        let diff: Mat<_> = &m - &pt.matrix;
        prop_assert!(symneg_core::linalg::max_abs(diff.as_ref()) < 1e-14);
    }

    #[test]
    fn rho_spectrum_is_a_probability_vector(g in small_geometry(), seed in any::<u64>()) {
        let rho = build_rho(&sample_block(&g, 3, seed).unwrap(), true).unwrap();
        let ev = hermitian_eigenvalues(rho.rho.as_ref()).unwrap();
        prop_assert!(ev.iter().all(|&x| x > -1e-13));
        prop_assert!((ev.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn criticality_flags_respect_relabeling(g in small_geometry()) {
        let swapped = g.swapped();
        for p in enumerate_pt_pairs(&g).unwrap() {
            let a = criticality_flags(p.q1, p.q2, &g).unwrap();
            prop_assert_eq!(a.g1_critical, criticality_flags(p.q2, p.q1, &swapped).unwrap().g1_critical);
            // The diagonal block with A1 charge q1 carries A2 charge q̄1.
            let diag = criticality_flags(g.bar(p.q1), p.q2, &swapped).unwrap();
            prop_assert_eq!(a.g2_critical, diag.g2_critical);
        }
    }

    #[test]
    fn semicircle_components_obey_sum_rules(g in small_geometry()) {
        for m in semicircle_components(&g).unwrap() {
            let (em, et) = m.sum_rule_errors();
            prop_assert!(em < 1e-8 && et < 1e-8, "{:?}: {em:e} {et:e}", m.component);
        }
    }

    #[test]
    fn phase_is_invariant_under_relabeling(
        r1 in 0.05f64..0.95, r_a in 0.05f64..0.95, nu_a in 0.05f64..0.95, nu_b in 0.05f64..0.95
    ) {
        let p = ThermoPoint::from_fillings(r1, r_a, nu_a, nu_b).unwrap();
        let opts = ClassifyOptions::default();
        prop_assert_eq!(classify_phase(&p, &opts).label, classify_phase(&p.swapped(), &opts).label);
    }

    #[test]
    fn mutual_information_is_nonnegative(
        r1 in 0.05f64..0.95, r_a in 0.05f64..0.95, nu_a in 0.05f64..0.95, nu_b in 0.05f64..0.95, n in 20.0f64..400.0
    ) {
        let p = ThermoPoint::from_fillings(r1, r_a, nu_a, nu_b).unwrap().with_n(n);
        let mi = mutual_information_u1(&p).unwrap();
        prop_assert!(mi.value.is_finite() && mi.value >= 0.0);
    }
}
