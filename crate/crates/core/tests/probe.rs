#[test]
fn probe() {
    use blobtr_core::algebra::Context;
    use blobtr_core::forms::*;
    let ctx = Context::empty();
    eprintln!("parsing simple...");
    let f1 = parse_form(&ctx, &[FormVariable::new("z1", 0)], "dz[z1] / (z1 - 1)^2").unwrap();
    eprintln!("ok: {}", f1);
    eprintln!("parsing two-var numerator...");
    let f2 = parse_form(
        &ctx,
        &[FormVariable::new("z1", 0), FormVariable::new("z2", 0)],
        "(z1 + z2) * dz[z1] * dz[z2]",
    )
    .unwrap();
    eprintln!("ok: {}", f2);
    eprintln!("parsing full...");
    let f = parse_form(
        &ctx,
        &[FormVariable::new("z1", 0), FormVariable::new("z2", 0)],
        "dz[z1] * dz[z2] * (z1 + z2) / ((z1 - 1)^2 * (z2 + 1)^3)",
    )
    .unwrap();
    eprintln!("ok: {}", f);
    eprintln!("converting to poles...");
    let p = f.body_poles();
    eprintln!("poles: {:?}", p.map(|q| q.num_terms()));
}
