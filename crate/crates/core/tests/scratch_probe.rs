use nalgebra::DVector;
use ratebv::*;
use std::time::Instant;

fn vec1(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

#[test]
fn probe_extraction_and_certification() {
    let play = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::Zero).unwrap();
    let ramp = LoadPath::new(vec![0.0, 2.0], vec![vec1(0.0), vec1(2.0)]).unwrap();

    let t0 = Instant::now();
    let (cand, report) = extract_bv(
        &play,
        &ramp,
        &vec1(0.0),
        &[1e-2, 1e-3, 1e-4],
        &ExtractOptions::default(),
    )
    .unwrap();
    println!("play extraction in {:?}", t0.elapsed());
    println!("  S values: {:?}", report.s_values);
    for p in &report.pairs {
        println!(
            "  pair eps {:.0e}->{:.0e}: d_affine {:.3e}, d_constant {:.3e}, s_gap {:.3e}",
            p.eps_coarse, p.eps_fine, p.d_affine, p.d_constant, p.s_gap
        );
    }
    println!("  cauchy affine={} constant={}", report.cauchy_affine, report.cauchy_constant);
    println!("  candidate G nodes: {}", cand.g_mask.iter().filter(|&&b| b).count());

    let cert = certify(&play, &ramp, &vec1(0.0), &cand, &ToleranceProfile::standard()).unwrap();
    println!(
        "  play cert: passed={} norm={:.3e} comp={:.3e} edb={:.3e} chain={:.3e} s_id={:.3e} components={}",
        cert.passed,
        cert.normalization_defect,
        cert.complementarity_defect,
        cert.edb_defect,
        cert.chain_rule_defect,
        cert.apriori.s_identity_defect,
        cert.g_components.len()
    );

    // Double-well.
    let dw = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::DoubleWell { beta: 10.0 }).unwrap();
    let dw_ramp = LoadPath::new(vec![0.0, 1.0], vec![vec1(0.0), vec1(5.0)]).unwrap();
    let opts = ExtractOptions {
        tau_rule: TauRule::Proportional { factor: 2e-3 },
        s_samples: 12001,
        ..ExtractOptions::default()
    };
    let t0 = Instant::now();
    let (cand, report) = extract_bv(&dw, &dw_ramp, &vec1(-1.0), &[1e-2, 1e-3, 1e-4], &opts).unwrap();
    println!("dw extraction in {:?}", t0.elapsed());
    println!("  S values: {:?}", report.s_values);
    for p in &report.pairs {
        println!(
            "  pair eps {:.0e}->{:.0e}: d_affine {:.3e}, d_constant {:.3e}, s_gap {:.3e}",
            p.eps_coarse, p.eps_fine, p.d_affine, p.d_constant, p.s_gap
        );
    }
    println!("  cauchy affine={} constant={}", report.cauchy_affine, report.cauchy_constant);

    let cert = certify(&dw, &dw_ramp, &vec1(-1.0), &cand, &ToleranceProfile::standard()).unwrap();
    println!(
        "  dw cert: passed={} norm={:.3e} comp={:.3e} edb={:.3e} chain={:.3e} s_id={:.3e}",
        cert.passed,
        cert.normalization_defect,
        cert.complementarity_defect,
        cert.edb_defect,
        cert.chain_rule_defect,
        cert.apriori.s_identity_defect
    );
    for c in &cert.g_components {
        println!(
            "  component [{:.4},{:.4}] t_var={:.3e} t_const={} lam_pos={} min_lam={:.3e} inv_lam_sum={:.3e}",
            c.s_start, c.s_end, c.t_hat_variation, c.t_constant, c.lambda_positive_interior,
            c.min_interior_lambda, c.inv_lambda_sum
        );
    }
    println!(
        "  endpoints t={} z={} force_ok={} state_ok={} s_ok={} incl_res={:.3e} degen={} mask_ok={}",
        cert.endpoint_t_ok, cert.endpoint_z_ok, cert.force_bound_ok,
        cert.apriori.state_ok, cert.apriori.s_ok,
        cert.lambda_inclusion_residual, cert.degenerate_lambda_nodes, cert.mask_consistent
    );
    println!(
        "  force_sup={:.6} force_off_g={:.6} r_box+thresh={:.6}",
        cert.force_sup, cert.force_sup_off_g,
        1.0 + cert.gap_threshold
    );

    // Jump transient cross-validation.
    if let Some(c) = cert.g_components.first() {
        let (i0, i1) = (c.start_index, c.end_index);
        let ell_star = dw_ramp.value(cand.t_hat[i0]);
        let t0 = Instant::now();
        let jt = jump_transient(
            &dw,
            &ell_star,
            &cand.z_hat[i0],
            Some(&cand.z_hat[i0 + 1]),
            0.0,
            1e-4,
            1e-6,
            200.0,
        )
        .unwrap();
        println!(
            "  jump transient in {:?}: converged={} z_b={:.6} vs z_hat(b)={:.6}, diff={:.3e}",
            t0.elapsed(),
            jt.run.converged,
            jt.z_end[0],
            cand.z_hat[i1][0],
            dw.v_norm(&(&jt.z_end - &cand.z_hat[i1]))
        );
    }

    // Corruption must fail.
    let mut bad = cand.clone();
    let m = bad.len();
    for j in m / 4..m / 2 {
        bad.z_hat[j][0] += 0.1;
    }
    let cert_bad = certify(&dw, &dw_ramp, &vec1(-1.0), &bad, &ToleranceProfile::standard()).unwrap();
    println!(
        "  corrupted cert: passed={} norm={:.3e} edb={:.3e}",
        cert_bad.passed, cert_bad.normalization_defect, cert_bad.edb_defect
    );
}

#[test]
fn probe_dw_normalization_argmax() {
    let dw = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::DoubleWell { beta: 10.0 }).unwrap();
    let dw_ramp = LoadPath::new(vec![0.0, 1.0], vec![vec1(0.0), vec1(5.0)]).unwrap();
    let opts = ExtractOptions {
        tau_rule: TauRule::Proportional { factor: 2e-3 },
        s_samples: 12001,
        ..ExtractOptions::default()
    };
    let (cand, _) = extract_bv(&dw, &dw_ramp, &vec1(-1.0), &[1e-2, 1e-3, 1e-4], &opts).unwrap();
    let m = cand.len();
    let h = cand.h_s();
    let sten = |j: usize| -> (usize, usize) {
        let mask = &cand.g_mask;
        if j == 0 { return (0, 1); }
        if j + 1 == m { return (m - 2, m - 1); }
        let (b, c, a) = (mask[j - 1], mask[j], mask[j + 1]);
        if c != b && c == a { (j, j + 1) } else if c == b && c != a { (j - 1, j) } else { (j - 1, j + 1) }
    };
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for j in 1..m - 1 {
        let (l, r) = sten(j);
        let d = (r - l) as f64 * h;
        let tp = (cand.t_hat[r] - cand.t_hat[l]) / d;
        let dz = (&cand.z_hat[r] - &cand.z_hat[l]) / d;
        let mut total = tp + dw.r_value(&dz);
        if cand.g_mask[j] {
            total += dw.v_norm(&dz) * cand.gap[j];
        }
        rows.push((j, (total - 1.0).abs()));
    }
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    // complementarity argmax
    let mut comp: Vec<(usize, f64)> = (1..m - 1)
        .map(|j| (j, (cand.t_hat[j + 1] - cand.t_hat[j - 1]) / (2.0 * h) * cand.gap[j]))
        .collect();
    comp.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for (j, d) in comp.iter().take(4) {
        let j = *j;
        println!(
            "COMP j={j} prod={d:.3e} s={:.4} gap={:.4e} in_g={} t: {:.8} {:.8} {:.8}",
            cand.s_grid[j], cand.gap[j], cand.g_mask[j],
            cand.t_hat[j - 1], cand.t_hat[j], cand.t_hat[j + 1]
        );
    }
    for (j, d) in rows.iter().take(8) {
        let j = *j;
        println!(
            "j={j} defect={d:.3e} s={:.4} t={:.6} z={:.6} gap={:.4e} in_g={} (neighbors t: {:.6} {:.6}, z: {:.6} {:.6})",
            cand.s_grid[j], cand.t_hat[j], cand.z_hat[j][0], cand.gap[j], cand.g_mask[j],
            cand.t_hat[j-1], cand.t_hat[j+1], cand.z_hat[j-1][0], cand.z_hat[j+1][0],
        );
    }
}

#[test]
fn probe_boundary_blend_values() {
    let dw = ProblemSpec::scalar(1.0, 1.0, 1.0, Nonconvexity::DoubleWell { beta: 10.0 }).unwrap();
    let dw_ramp = LoadPath::new(vec![0.0, 1.0], vec![vec1(0.0), vec1(5.0)]).unwrap();
    let opts = ExtractOptions {
        tau_rule: TauRule::Proportional { factor: 2e-3 },
        s_samples: 12001,
        ..ExtractOptions::default()
    };
    let (cand, _) = extract_bv(&dw, &dw_ramp, &vec1(-1.0), &[1e-2, 1e-3, 1e-4], &opts).unwrap();
    // Fresh un-finalized member at the finest eps.
    let traj = solve_viscous(&dw, &dw_ramp, &vec1(-1.0), 1e-4, 2e-7).unwrap();
    let raw = reparametrize(&dw, &traj, &dw_ramp, 8001).unwrap();
    let i1 = (0..cand.len()).rev().find(|&j| cand.g_mask[j]).unwrap();
    println!("i1 = {i1}");
    for j in i1.saturating_sub(2)..(i1 + 25).min(cand.len()) {
        println!(
            "j={j} in_g={} t_raw={:.9} t_fin={:.9} gap_raw={:.3e} gap_fin={:.3e} z={:.6}",
            cand.g_mask[j], raw.t_hat[j], cand.t_hat[j], raw.gap[j], cand.gap[j], cand.z_hat[j][0]
        );
    }
}
