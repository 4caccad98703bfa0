//! End-to-end checks through the public API only: realize a chain, build the
//! intertwiner from its extracted constants, push the inner product forward,
//! and interrogate the compressed multiplication pair.

use ballrep_core::hc::{ambient_basis, infinitesimal_action_basis, verify_intertwining, zero_coupling};
use ballrep_core::kernel::{
    graded_gram, gram_from_kernel, pushforward_gram, skew_adjoint_residual, KernelForm,
    KernelFunction,
};
use ballrep_core::lie::StructureContext;
use ballrep_core::poly::SectionSpace;
use ballrep_core::rep::{cartan_chain, check_sharp, cjk_table, extract_cj, realize, RepSpec};
use ballrep_core::{cd, gamma, one, re, C};

#[test]
fn chain_to_intertwiner_to_unitary_structure() {
    let ctx = StructureContext::new(2).unwrap();
    let lambda = -3.0;
    let r = realize(&RepSpec::Filiform(cartan_chain(0, 2, lambda, vec![one(), one()]))).unwrap();
    let space = SectionSpace::new(2, 5, r.dim());

    // Constants, closed-form operator, intertwining.
    let cs: Vec<C> = (1..=2).map(|j| extract_cj(&r, j, &ctx).unwrap()).collect();
    let (u, v) = check_sharp(&cs).expect("chain constants fit an affine progression");
    let table = cjk_table(u, v, lambda, 2, 2);
    assert!(table.regular);
    let g = gamma::build_gamma(&r, &ctx, &table, &space).unwrap();
    let basis = ambient_basis(&ctx);
    let act0 = infinitesimal_action_basis(&zero_coupling(&r), &ctx, &space, &basis).unwrap();
    let acty = infinitesimal_action_basis(&r, &ctx, &space, &basis).unwrap();
    let resid = verify_intertwining(&g, &act0, &acty, &space);
    assert!(resid < 1e-10, "intertwining residual {resid:.3e}");

    // Pushforward inner product makes the realized real-form action skew.
    let g0 = graded_gram(&r, &space, KernelForm::Action).unwrap();
    g0.ensure_positive().unwrap();
    let gy = pushforward_gram(&g0, &g).unwrap();
    let ops = infinitesimal_action_basis(&r, &ctx, &space, &ctx.real_form_basis()).unwrap();
    let skew = skew_adjoint_residual(&gy, &ops.ops, &space);
    assert!(skew < 1e-8, "skew residual {skew:.3e}");

    // The pushforward pair transforms homogeneously.
    let pair = cd::build_pair(&gy, &space).unwrap();
    let hom = cd::homogeneity_check(&pair, &r, &ctx, &space).unwrap();
    assert!(hom.commutation_residual < 1e-8);
    assert!(hom.skew_residual < 1e-8);
}

#[test]
fn kernel_pair_reports_the_fiber_dimension() {
    let kf = KernelFunction::new(2, 1, 1.5, KernelForm::Standard).unwrap();
    let space = SectionSpace::new(2, 5, kf.fiber_dim());
    let gram = gram_from_kernel(&kf, &space).unwrap();
    let pair = cd::build_pair(&gram, &space).unwrap();
    let origin = cd::joint_kernel_dim(&pair, &[re(0.0), re(0.0)], 1e-6).unwrap();
    assert_eq!(origin.dim, 2);
    assert!(origin.certified);
    let interior = cd::joint_kernel_dim(&pair, &[re(0.2), C::new(0.0, 0.1)], 1e-6).unwrap();
    assert_eq!(interior.dim, 2);
}

#[test]
fn battery_reports_are_deterministic() {
    let once = ballrep_core::suite::run(5).unwrap();
    let twice = ballrep_core::suite::run(5).unwrap();
    assert!(once.passed);
    assert_eq!(
        serde_json::to_string(&once.records).unwrap(),
        serde_json::to_string(&twice.records).unwrap()
    );
}
