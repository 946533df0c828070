use std::fmt::Write;

use crate::crystal::Crystal;

/// Minimal CIF in the P1 setting: cell parameters and fractional sites.
pub fn to_cif(c: &Crystal, name: &str) -> String {
    let p = c.lattice.params();
    let mut s = String::new();
    let _ = writeln!(s, "data_{}", name.replace(char::is_whitespace, "_"));
    let _ = writeln!(s, "_symmetry_space_group_name_H-M   'P 1'");
    let _ = writeln!(s, "_symmetry_Int_Tables_number   1");
    for (key, v) in [
        ("length_a", p.a),
        ("length_b", p.b),
        ("length_c", p.c),
        ("angle_alpha", p.alpha),
        ("angle_beta", p.beta),
        ("angle_gamma", p.gamma),
    ] {
        let _ = writeln!(s, "_cell_{key}   {v}");
    }
    let _ = writeln!(s, "_cell_volume   {}", c.volume());
    s.push_str("loop_\n_symmetry_equiv_pos_as_xyz\n  'x, y, z'\n");
    s.push_str("loop_\n_atom_site_label\n_atom_site_type_symbol\n_atom_site_fract_x\n_atom_site_fract_y\n_atom_site_fract_z\n_atom_site_occupancy\n");
    for (i, (e, f)) in c.species.iter().zip(&c.frac).enumerate() {
        let _ = writeln!(s, "  {}{} {} {} {} {} 1", e.symbol(), i, e.symbol(), f[0], f[1], f[2]);
    }
    s
}
