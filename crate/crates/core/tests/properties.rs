use critx_core::basis::{select_bc, BoundaryCondition};
use critx_core::eigen::{LanczosOptions, SolveOptions};
use critx_core::fidelity::{DrivenModel, FsMethod, DEFAULT_DELTA};
use critx_core::models::{AhmParams, DrivingTag, ModelParams, TfimParams};
use critx_core::tfim_oracle;

fn tight(m: DrivenModel) -> DrivenModel {
    m.with_options(
        LanczosOptions { tol: 1e-12, ..LanczosOptions::default() },
        SolveOptions { tol: 1e-12, max_iter: 10_000 },
    )
}

fn ahm(sites: u32, t: f64, u: f64, n_up: u32, n_dn: u32, bc: BoundaryCondition) -> DrivenModel {
    let p = ModelParams::Ahm(AhmParams { sites, t, u, n_up, n_dn, bc });
    tight(DrivenModel::new(p, DrivingTag::AhmDownHop).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn particle_hole_pairs_share_fs() {
    for t in [0.2, 0.45, 0.8] {
        let n4 = ahm(6, t, 30.0, 2, 2, select_bc(4).unwrap());
        let n8 = ahm(6, t, 30.0, 4, 4, select_bc(8).unwrap());
        let a = n4.fs(t, FsMethod::LinearResponse, DEFAULT_DELTA).unwrap();
        let b = n8.fs(t, FsMethod::LinearResponse, DEFAULT_DELTA).unwrap();
        assert!((a.chi - b.chi).abs() < 1e-8 * a.chi.max(1.0), "t={t}: {} vs {}", a.chi, b.chi);
    }
}

#[test]
fn tfim_routes_agree() {
    for (sites, lambda) in [(6, 0.7), (7, 1.3), (8, 0.4)] {
        let p = ModelParams::Tfim(TfimParams { sites, lambda, h: 0.0 });
        let m = tight(DrivenModel::new(p, DrivingTag::TfimXSum).unwrap());
        let ss = m.fs(lambda, FsMethod::SpectralSum, DEFAULT_DELTA).unwrap();
        let fd = m.fs(lambda, FsMethod::FiniteDifference, DEFAULT_DELTA).unwrap();
        let lr = m.fs(lambda, FsMethod::LinearResponse, DEFAULT_DELTA).unwrap();
        assert!(rel(ss.chi, fd.chi) < 1e-5, "L={sites}: {} {}", ss.chi, fd.chi);
        assert!(rel(ss.chi, lr.chi) < 1e-8, "L={sites}: {} {}", ss.chi, lr.chi);
    }
}

#[test]
fn oracle_tracks_lanczos_fs_at_twelve_sites() {
    let p = ModelParams::Tfim(TfimParams { sites: 12, lambda: 0.8, h: 0.0 });
    let m = tight(DrivenModel::new(p, DrivingTag::TfimXSum).unwrap());
    for lambda in [0.6, 0.8, 1.2] {
        let lr = m.fs(lambda, FsMethod::LinearResponse, DEFAULT_DELTA).unwrap();
        let exact = tfim_oracle::fs_exact(lambda, 12).unwrap();
        assert!(rel(lr.chi, exact) < 1e-8, "λ={lambda}: {} {exact}", lr.chi);
    }
}

#[test]
fn free_fermions_have_no_fs_in_any_sector() {
    for (n_up, n_dn) in [(1, 1), (2, 1), (3, 3), (1, 4)] {
        for t in [0.3, 0.7, 1.0] {
            let bc = select_bc(n_up + n_dn).unwrap_or(BoundaryCondition::Periodic);
            let m = ahm(6, t, 0.0, n_up, n_dn, bc);
            match m.fs(t, FsMethod::LinearResponse, DEFAULT_DELTA) {
                Ok(p) => assert!(p.chi <= 1e-6, "({n_up},{n_dn}) t={t}: {}", p.chi),
                // open shells of the free ring are degenerate and refused
                Err(critx_core::Error::Degenerate { .. }) => {}
                Err(e) => panic!("({n_up},{n_dn}) t={t}: {e}"),
            }
        }
    }
}
