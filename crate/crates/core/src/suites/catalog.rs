use crate::brenier::{brenier_1d, brenier_gaussian, brenier_product, brenier_radial, TransportMap};
use crate::error::Result;
use crate::exec::stream_rng;
use crate::gamma2::{
    GaussianTriple, OneDTriple, ProductTriple, RadialTriple, SmoothTriple, SyntheticTriple,
};
use crate::measures::{
    default_catalog, make_catalog_measure, GaussianMeasure, RadialMeasure, RadialProfile,
};
use crate::spd_geometry::random_spd_with_range;
use std::sync::Arc;

/// A labelled transport map.
#[derive(Clone)]
pub struct Experiment {
    pub label: String,
    pub map: Arc<dyn TransportMap>,
    /// The 1D factors when `map` is a product map.
    pub factors: Option<Vec<crate::brenier::Map1D>>,
}

impl Experiment {
    pub fn new(label: impl Into<String>, map: Arc<dyn TransportMap>) -> Self {
        Self {
            label: label.into(),
            map,
            factors: None,
        }
    }
}

fn m(name: &str, p: &[f64]) -> Result<crate::measures::LogConcaveMeasure1D> {
    make_catalog_measure(name, p)
}

/// The fixed experiment catalog: every catalog measure transported to the
/// next one, three products in dimension 3, radial ball-to-Gaussian maps in
/// dimensions 2, 3, 5, 8, and a Gaussian pair in dimension 4.
pub fn catalog_experiments(seed: u64) -> Result<Vec<Experiment>> {
    let cat = default_catalog();
    let mut out = vec![];
    for i in 0..cat.len() {
        let (a, b) = (&cat[i], &cat[(i + 1) % cat.len()]);
        out.push(Experiment::new(
            format!("1d {} -> {}", a.label(), b.label()),
            Arc::new(brenier_1d(a.clone(), b.clone())),
        ));
    }
    for (k, factors) in product_factors()?.into_iter().enumerate() {
        let mut e = Experiment::new(
            format!("product-{k} n=3"),
            Arc::new(brenier_product(factors.clone())?),
        );
        e.factors = Some(factors);
        out.push(e);
    }
    for n in [2, 3, 5, 8] {
        let map = brenier_radial(
            RadialMeasure::uniform_ball(n, 1.0)?,
            RadialMeasure::gaussian(n, 1.0)?,
        )?;
        out.push(Experiment::new(
            format!("radial ball -> gaussian n={n}"),
            Arc::new(map),
        ));
    }
    let mut rng = stream_rng(seed, u64::MAX);
    let a = GaussianMeasure::new(vec![0.0; 4], random_spd_with_range(4, 1.5, &mut rng))?;
    let b = GaussianMeasure::new(
        vec![1.0, -1.0, 0.5, 0.0],
        random_spd_with_range(4, 1.5, &mut rng),
    )?;
    out.push(Experiment::new(
        "gaussian n=4",
        Arc::new(brenier_gaussian(a, b)?),
    ));
    Ok(out)
}

fn product_factors() -> Result<Vec<Vec<crate::brenier::Map1D>>> {
    Ok(vec![
        vec![
            brenier_1d(m("uniform", &[0.0, 1.0])?, m("exponential", &[1.0])?),
            brenier_1d(m("gamma", &[2.0, 1.0])?, m("logistic", &[0.0, 1.0])?),
            brenier_1d(m("beta", &[2.0, 2.0])?, m("laplace", &[0.0, 1.0])?),
        ],
        vec![
            brenier_1d(m("gaussian", &[0.0, 1.0])?, m("subbotin", &[3.0])?),
            brenier_1d(m("laplace", &[0.0, 1.0])?, m("uniform", &[-1.0, 1.0])?),
            brenier_1d(m("exponential", &[2.0])?, m("beta", &[3.0, 2.0])?),
        ],
        vec![
            brenier_1d(m("logistic", &[0.0, 1.0])?, m("gamma", &[3.0, 1.0])?),
            brenier_1d(m("subbotin", &[4.0])?, m("gaussian", &[1.0, 2.0])?),
            brenier_1d(m("beta", &[2.0, 5.0])?, m("exponential", &[1.0])?),
        ],
    ])
}

/// Twenty-one smooth triples in dimensions 1 to 3: closed-form 1D, product,
/// Gaussian and radial transports plus synthetic potentials.
pub fn gamma2_triples(seed: u64) -> Result<Vec<Arc<dyn SmoothTriple>>> {
    let mut out: Vec<Arc<dyn SmoothTriple>> = vec![];
    let one_d: [(&str, &[f64], &str, &[f64]); 10] = [
        ("gaussian", &[0.0, 1.0], "logistic", &[0.0, 1.0]),
        ("gamma", &[2.0, 1.0], "beta", &[2.0, 2.0]),
        ("beta", &[2.0, 3.0], "subbotin", &[3.0]),
        ("logistic", &[0.0, 1.0], "gaussian", &[1.0, 2.0]),
        ("uniform", &[0.0, 1.0], "gaussian", &[0.0, 1.0]),
        ("exponential", &[1.0], "gamma", &[3.0, 1.0]),
        ("subbotin", &[3.0], "logistic", &[0.0, 2.0]),
        ("gaussian", &[0.0, 1.0], "beta", &[2.0, 2.0]),
        ("gamma", &[3.0, 2.0], "gaussian", &[0.0, 1.0]),
        ("beta", &[3.0, 3.0], "exponential", &[2.0]),
    ];
    for (a, pa, b, pb) in one_d {
        out.push(Arc::new(OneDTriple::new(brenier_1d(m(a, pa)?, m(b, pb)?))?));
    }
    out.push(Arc::new(ProductTriple::new(brenier_product(vec![
        brenier_1d(m("logistic", &[0.0, 1.0])?, m("gamma", &[3.0, 1.0])?),
        brenier_1d(m("gaussian", &[0.0, 2.0])?, m("beta", &[2.0, 2.0])?),
    ])?)?));
    out.push(Arc::new(ProductTriple::new(brenier_product(vec![
        brenier_1d(m("gamma", &[2.0, 1.0])?, m("gaussian", &[0.0, 1.0])?),
        brenier_1d(m("beta", &[2.0, 3.0])?, m("logistic", &[0.0, 1.0])?),
        brenier_1d(m("subbotin", &[3.0])?, m("exponential", &[1.0])?),
    ])?)?));
    let mut rng = stream_rng(seed, u64::MAX - 1);
    for n in [2, 3] {
        let a = GaussianMeasure::new(vec![0.0; n], random_spd_with_range(n, 1.0, &mut rng))?;
        let b = GaussianMeasure::new(vec![0.5; n], random_spd_with_range(n, 1.0, &mut rng))?;
        out.push(Arc::new(GaussianTriple::new(brenier_gaussian(a, b)?)));
    }
    let radial = [
        (
            RadialMeasure::uniform_ball(2, 1.0)?,
            RadialMeasure::gaussian(2, 1.0)?,
        ),
        (
            RadialMeasure::gaussian(3, 1.0)?,
            RadialMeasure::new(3, RadialProfile::ExpPower { p: 4.0, scale: 1.0 })?,
        ),
        (
            RadialMeasure::new(2, RadialProfile::ExpPower { p: 3.0, scale: 1.0 })?,
            RadialMeasure::gaussian(2, 2.0)?,
        ),
    ];
    for (a, b) in radial {
        out.push(Arc::new(RadialTriple::new(brenier_radial(a, b)?)));
    }
    for n in 1..=3 {
        out.push(Arc::new(SyntheticTriple::random(n, &mut rng)));
    }
    Ok(out)
}
