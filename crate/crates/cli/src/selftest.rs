//! Fast end-to-end checks run by `bvd selftest`.

use bvd_core::diagram::{agreement, first_type_diagram_2d, raster_diagram, RasterMode};
use bvd_core::exp_family::{kl_divergence, ExponentialFamily};
use bvd_core::planar::Rect;
use bvd_core::triangulation::{bregman_delaunay_2d, empty_sphere_check};
use bvd_core::{Generator, Result};

use crate::{EXIT_NUMERICAL, EXIT_OK};

const SITES: [[f64; 2]; 6] = [[0.2, 0.3], [0.7, 0.2], [0.5, 0.6], [0.15, 0.8], [0.85, 0.75], [0.45, 0.35]];

fn euclidean_half_norm() -> Result<bool> {
    let d = Generator::squared_half_norm(2).divergence(&[1.0, 2.0], &[0.0, 0.5])?;
    Ok((d - 1.625).abs() < 1e-14)
}

fn legendre_duality() -> Result<bool> {
    let g = Generator::shannon(2);
    let (p, q) = ([0.3, 0.6], [0.7, 0.2]);
    let d = g.divergence(&p, &q)?;
    let dual = g.dual()?.divergence(&g.gradient(&q)?, &g.gradient(&p)?)?;
    Ok((d - dual).abs() <= 1e-10 * (1.0 + d))
}

fn poisson_kl() -> Result<bool> {
    let fam = ExponentialFamily::by_name("poisson")?;
    let (p, q) = (fam.natural_from_source(&[2.0])?, fam.natural_from_source(&[1.0])?);
    let kl = kl_divergence(&fam, &p, &q)?;
    Ok((kl - fam.closed_form_kl_source(&[2.0], &[1.0])?).abs() < 1e-12)
}

fn diagram_matches_raster() -> Result<bool> {
    let g = Generator::shannon(2);
    let clip = Rect::new(0.05, 0.05, 0.95, 0.95)?;
    let d = first_type_diagram_2d(&g, &SITES, &clip)?;
    let r = raster_diagram(&g, &SITES, &RasterMode::First, &clip, 128)?;
    Ok(agreement(&d, &r)?.fraction() >= 0.99)
}

fn delaunay_is_empty_sphere() -> Result<bool> {
    let g = Generator::burg(2);
    let t = bregman_delaunay_2d(&g, &SITES)?;
    Ok(t.euler_characteristic() == 1 && empty_sphere_check(&g, &t)?)
}

/// Prints one line per check and returns the exit code.
pub fn run() -> i32 {
    let checks: [(&str, fn() -> Result<bool>); 5] = [
        ("euclidean_half_norm", euclidean_half_norm),
        ("legendre_duality", legendre_duality),
        ("poisson_kl", poisson_kl),
        ("diagram_matches_raster", diagram_matches_raster),
        ("delaunay_is_empty_sphere", delaunay_is_empty_sphere),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(true) => println!("PASS {name}"),
            Ok(false) => {
                failed += 1;
                println!("FAIL {name}");
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}
