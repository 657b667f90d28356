//! Tabulate the arcsine variable, the arc length and the complex amplitude
//! on a frequency grid, and invert the arcsine variable.

use erlab::transform::{chi, chi_inverse, er_stddev_laws, psi, transform_table, zeta, RealERParams};

fn main() -> erlab::Result<()> {
    let params = RealERParams::default();
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10}",
        "nu", "chi", "zeta", "re psi", "im psi"
    );
    for row in transform_table(11, &params, 0.0)? {
        println!(
            "{:>6.2} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            row.nu, row.chi, row.zeta, row.re_psi, row.im_psi
        );
    }

    let nu = 0.37;
    let x = chi(nu, &params)?;
    println!("chi({nu}) = {x}, inverse gives {}", chi_inverse(x, &params)?);
    println!("zeta({nu}) = {}", zeta(nu)?);
    let z = psi(nu, 1.2)?;
    println!("psi({nu}, 1.2) = {z:.6}, |psi|^2 = {:.6}", z.norm_sqr());

    let (d_chi, d_psi) = er_stddev_laws(100, &params)?;
    println!("large-N spreads at N = 100: chi {d_chi:.6}, psi {d_psi:.6}");
    Ok(())
}
