//! Built-in networks used by the examples, experiments and tests.

use crate::error::Result;
use crate::model::{Cpd, Network, NetworkBuilder, SoftmaxCpd};

/// Crop network extended with Policy, Buy-driven Profit and a product feature.
///
/// Buy and Subsidize list "Yes" first. Normal parameters are (mean, variance).
pub fn extended_crop() -> Network {
    let mut b = NetworkBuilder::new();
    b.discrete("Policy", &["Liberal", "Conservative"])
        .discrete("Rain", &["Drought", "Average", "Floods"])
        .discrete("Subsidize", &["Yes", "No"])
        .continuous("Crop")
        .continuous("Price")
        .discrete("Buy", &["Yes", "No"])
        .discrete("Profit", &["Loss", "Even", "Profit"])
        .table("Policy", &[], &[&[0.5, 0.5]])
        .table("Rain", &[], &[&[0.35, 0.6, 0.05]])
        .table(
            "Subsidize",
            &["Rain", "Policy"],
            &[
                &[0.4, 0.6],
                &[0.3, 0.7],
                &[0.95, 0.05],
                &[0.95, 0.05],
                &[0.5, 0.5],
                &[0.2, 0.8],
            ],
        )
        .clg("Crop", &["Rain"], &[], &[(3.0, &[], 0.5), (5.0, &[], 1.0), (2.0, &[], 0.25)])
        .clg("Price", &["Subsidize"], &["Crop"], &[(9.0, &[-1.0], 1.0), (12.0, &[-1.0], 1.0)])
        .sigmoid("Buy", &["Price"], 1.0, &[7.0]);
    // features: P and P*C; the Even logit is the zero reference
    let even: (f64, &[f64]) = (0.0, &[0.0, 0.0]);
    b.softmax(
        "Profit",
        &["Subsidize", "Buy"],
        &["Price", "Crop"],
        Some(&[&[1, 0], &[1, 1]]),
        &[
            &[(13.0, &[-2.0, -1.0]), even, (-23.0, &[3.0, 1.0])],
            &[(13.0, &[-2.0, 0.0]), even, (-23.0, &[3.0, 0.0])],
            &[(13.0, &[0.0, -1.0]), even, (-23.0, &[0.0, 1.0])],
            &[(13.0, &[0.0, 0.0]), even, (-23.0, &[0.0, 0.0])],
        ],
    );
    b.build().expect("extended crop network is valid")
}

/// X ~ N(0, 1) with a sigmoid child: P(A = a1 | x) = 1 / (1 + exp(-x)).
pub fn xa_toy() -> Network {
    let mut b = NetworkBuilder::new();
    b.continuous("X")
        .discrete("A", &["a1", "a2"])
        .clg("X", &[], &[], &[(0.0, &[], 1.0)])
        .sigmoid("A", &["X"], 0.0, &[-1.0]);
    b.build().expect("toy network is valid")
}

/// Slope used for the "flat" and "sharp" sigmoids of [`axyb`].
pub const FLAT_SLOPE: f64 = 1.0;
pub const SHARP_SLOPE: f64 = 6.0;

/// A <- X -> Y -> B with corr(X, Y) = `corr` and both sigmoids of slope `slope`.
///
/// X and Y are standard normal marginally; the sigmoids are offset so that
/// neither child is symmetric.
pub fn axyb(corr: f64, slope: f64) -> Network {
    assert!(corr.abs() < 1.0, "correlation must be in (-1, 1)");
    let mut b = NetworkBuilder::new();
    b.continuous("X")
        .continuous("Y")
        .discrete("A", &["a1", "a2"])
        .discrete("B", &["b1", "b2"])
        .clg("X", &[], &[], &[(0.0, &[], 1.0)])
        .clg("Y", &[], &["X"], &[(0.0, &[corr], 1.0 - corr * corr)])
        .sigmoid("A", &["X"], -0.5 * slope, &[slope])
        .sigmoid("B", &["Y"], 0.3 * slope, &[slope]);
    b.build().expect("axyb network is valid")
}

/// Chain coefficients: X1 ~ N(0,1), X_{i+1} | X_i ~ N(CHAIN_AR x_i, 1 - CHAIN_AR^2).
pub const CHAIN_AR: f64 = 0.5;
pub const CHAIN_WEIGHT: f64 = 0.2;
pub const CHAIN_BIAS: f64 = 0.5;

/// X1 -> ... -> Xn with a binary A child of every X_i.
pub fn chain(n: usize) -> Network {
    assert!(n >= 1);
    let mut b = NetworkBuilder::new();
    let names: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
    for name in &names {
        b.continuous(name);
    }
    b.discrete("A", &["a1", "a2"]);
    b.clg(&names[0], &[], &[], &[(0.0, &[], 1.0)]);
    for i in 1..n {
        b.clg(&names[i], &[], &[&names[i - 1]], &[(0.0, &[CHAIN_AR], 1.0 - CHAIN_AR * CHAIN_AR)]);
    }
    let parents: Vec<&str> = names.iter().map(String::as_str).collect();
    b.sigmoid("A", &parents, CHAIN_BIAS, &vec![CHAIN_WEIGHT; n]);
    b.build().expect("chain network is valid")
}

/// Waste-incinerator CLG used as a stand-in base for the sensor experiment.
/// These parameters are a reconstruction, not a verified copy of the original.
pub fn emission_base() -> Network {
    let mut b = NetworkBuilder::new();
    b.discrete("BurningRegime", &["Stable", "Unstable"])
        .discrete("FilterState", &["Intact", "Defect"])
        .discrete("WasteType", &["Industrial", "Household"])
        .continuous("FilterEfficiency")
        .continuous("DustEmission")
        .continuous("CO2Concentration")
        .continuous("LightPenetrability")
        .continuous("MetalInWaste")
        .continuous("MetalEmission")
        .table("BurningRegime", &[], &[&[0.85, 0.15]])
        .table("FilterState", &[], &[&[0.95, 0.05]])
        .table("WasteType", &[], &[&[2.0 / 7.0, 5.0 / 7.0]])
        .clg(
            "FilterEfficiency",
            &["FilterState", "WasteType"],
            &[],
            &[(-3.2, &[], 2e-5), (-3.9, &[], 2e-5), (-0.5, &[], 1e-4), (-0.4, &[], 1e-4)],
        )
        .clg(
            "DustEmission",
            &["BurningRegime", "WasteType"],
            &["FilterEfficiency"],
            &[
                (6.5, &[1.0], 0.03),
                (6.0, &[1.0], 0.04),
                (7.5, &[1.0], 0.1),
                (7.0, &[1.0], 0.1),
            ],
        )
        .clg("CO2Concentration", &["BurningRegime"], &[], &[(-2.0, &[], 0.1), (-1.0, &[], 0.3)])
        .clg("LightPenetrability", &[], &["DustEmission"], &[(3.0, &[-0.5], 0.25)])
        .clg("MetalInWaste", &["WasteType"], &[], &[(0.5, &[], 0.01), (-0.5, &[], 0.005)])
        .clg(
            "MetalEmission",
            &[],
            &["DustEmission", "MetalInWaste"],
            &[(0.0, &[1.0, 1.0], 0.002)],
        );
    b.build().expect("emission base network is valid")
}

/// Sensor slopes and offsets, as (name, parent, w, b).
pub const EMISSION_SENSORS: [(&str, &str, f64, f64); 3] = [
    ("DustSensor", "DustEmission", 1.0, -3.0),
    ("CO2Sensor", "CO2Concentration", 3.0, 6.0),
    ("MetalSensor", "MetalEmission", 2.0, -5.6),
];

/// Adds the three binary sensors (states Low, High) with `P(High | y) = 1 / (1 + exp(-(w y + b)))`.
pub fn with_emission_sensors(base: &Network) -> Result<Network> {
    let mut vars = base.variables().to_vec();
    let mut cpds = base.cpds().to_vec();
    for (name, parent, w, bias) in EMISSION_SENSORS {
        let parent = base.id(parent)?;
        let child = crate::model::VarId(vars.len());
        vars.push(crate::model::Variable::discrete(name, &["Low", "High"]));
        // Low is state 0: P(Low | y) = 1 / (1 + exp(b + w y))
        cpds.push(Cpd::Softmax(SoftmaxCpd::sigmoid(child, vec![parent], bias, vec![w])));
    }
    Network::validated(vars, cpds)
}

/// Emission stand-in plus the sensors.
pub fn emission_sensors() -> Network {
    with_emission_sensors(&emission_base()).expect("sensors attach to the base network")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::eval_cd;

    #[test]
    fn builtins_validate() {
        extended_crop();
        xa_toy();
        axyb(0.5, SHARP_SLOPE);
        chain(8);
        emission_sensors();
    }

    #[test]
    fn sensor_orientation() {
        let net = emission_sensors();
        let dust = net.id("DustSensor").unwrap();
        let Cpd::Softmax(s) = net.cpd(dust) else { panic!() };
        // High is more likely for large dust emission
        let p = eval_cd(s, 0, &[5.0]).unwrap();
        assert!((p[1] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn toy_orientation() {
        let net = xa_toy();
        let Cpd::Softmax(s) = net.cpd(net.id("A").unwrap()) else { panic!() };
        let p = eval_cd(s, 0, &[1.0]).unwrap();
        assert!((p[0] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }
}
