//! Synthetic roofline model of a DNN accelerator.

use std::collections::BTreeMap;

use dsegym_core::{DesignPoint, EnvError, Observation, ParamValue, ParameterSpace, WorkloadSpec};
use serde::Deserialize;

use crate::synthetic::{require_trait, CostModel, Lookup, WorkloadFixture};

pub(crate) const MODEL_TOML: &str = include_str!("../fixtures/accel_model.toml");
pub(crate) const SPACE_TOML: &str = include_str!("../fixtures/accel_space.toml");
pub(crate) const SMALL_SPACE_TOML: &str = include_str!("../fixtures/accel_small_space.toml");

#[derive(Debug, Clone, Deserialize)]
struct Dataflow {
    utilization: f64,
    buffer_reuse: f64,
    spad_reuse: f64,
    spad_energy: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AccelModel {
    version: u32,
    frequency: f64,
    dram_bandwidth: f64,
    reference_buffer_kb: f64,
    base_area: f64,
    pe_area: f64,
    mac_area: f64,
    sram_area_per_kb: f64,
    mac_energy: f64,
    dram_energy: f64,
    leakage_per_mm2: f64,
    onchip_budget_kb: f64,
    reference: BTreeMap<String, ParamValue>,
    dataflow: BTreeMap<String, Dataflow>,
    pub(crate) workloads: BTreeMap<String, WorkloadFixture>,
}

/// Intermediate quantities of one evaluation, exposed for tests and tooling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roofline {
    pub compute_time: f64,
    pub memory_time: f64,
    pub dram_bytes: f64,
    pub onchip_kb: f64,
}

impl AccelModel {
    pub fn from_fixture() -> Result<Self, EnvError> {
        Self::from_toml_str(MODEL_TOML)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EnvError> {
        let model: AccelModel = toml::from_str(text).map_err(|e| EnvError::Fixture(e.to_string()))?;
        if model.version != 1 {
            return Err(EnvError::Fixture(format!("unsupported accel model version {}", model.version)));
        }
        let positive = [
            model.frequency,
            model.dram_bandwidth,
            model.reference_buffer_kb,
            model.onchip_budget_kb,
        ];
        if positive.iter().any(|&x| !(x > 0.0)) {
            return Err(EnvError::Fixture("accel constants must be positive".into()));
        }
        for (name, df) in &model.dataflow {
            if !(df.utilization > 0.0 && df.utilization <= 1.0) {
                return Err(EnvError::Fixture(format!("dataflow {name}: utilization out of (0, 1]")));
            }
        }
        Ok(model)
    }

    pub fn workload(&self, id: &str) -> Result<WorkloadSpec, EnvError> {
        self.workloads
            .get(id)
            .ok_or_else(|| EnvError::Workload(format!("unknown accel workload `{id}`")))?
            .spec(id)
    }

    pub fn roofline(
        &self,
        space: &ParameterSpace,
        point: &DesignPoint,
        workload: &WorkloadSpec,
    ) -> Result<Roofline, EnvError> {
        space.validate(point)?;
        let at = Lookup {
            space,
            point,
            reference: &self.reference,
        };
        let pes = at.number("NumPEs")?;
        let macs_per_pe = at.number("MACsPerPE")?;
        let buffer_kb = at.number("GlobalBufferKB")?;
        let spad_kb = at.number("PESPadKB")?;
        let df_name = at.label("Dataflow")?;
        let df = self
            .dataflow
            .get(df_name)
            .ok_or_else(|| EnvError::Fixture(format!("unknown dataflow `{df_name}`")))?;

        let macs = require_trait(workload, "macs")?;
        let bytes = require_trait(workload, "input_bytes")?
            + require_trait(workload, "weight_bytes")?
            + require_trait(workload, "output_bytes")?;

        let compute_time = macs / (pes * macs_per_pe * self.frequency * df.utilization);
        let traffic = 1.0 + df.buffer_reuse * self.reference_buffer_kb / buffer_kb + df.spad_reuse / spad_kb;
        let dram_bytes = bytes * traffic;
        Ok(Roofline {
            compute_time,
            memory_time: dram_bytes / self.dram_bandwidth,
            dram_bytes,
            onchip_kb: buffer_kb + pes * spad_kb,
        })
    }
}

impl CostModel for AccelModel {
    fn reference(&self) -> &BTreeMap<String, ParamValue> {
        &self.reference
    }

    fn metric_names(&self) -> &[&'static str] {
        &["latency", "energy", "area"]
    }

    fn evaluate(
        &self,
        space: &ParameterSpace,
        point: &DesignPoint,
        workload: &WorkloadSpec,
    ) -> Result<Observation, EnvError> {
        let roof = self.roofline(space, point, workload)?;
        if roof.onchip_kb > self.onchip_budget_kb {
            return Ok(Observation::infeasible());
        }
        let at = Lookup {
            space,
            point,
            reference: &self.reference,
        };
        let pes = at.number("NumPEs")?;
        let macs_per_pe = at.number("MACsPerPE")?;
        let df = &self.dataflow[at.label("Dataflow")?];
        let macs = require_trait(workload, "macs")?;

        let latency = roof.compute_time.max(roof.memory_time);
        let area = self.base_area
            + pes * (self.pe_area + self.mac_area * (macs_per_pe - 1.0))
            + self.sram_area_per_kb * roof.onchip_kb;
        let energy = macs * (self.mac_energy + df.spad_energy)
            + roof.dram_bytes * self.dram_energy
            + self.leakage_per_mm2 * area * latency;
        Observation::new([("latency", latency), ("energy", energy), ("area", area)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (AccelModel, ParameterSpace) {
        (
            AccelModel::from_fixture().unwrap(),
            ParameterSpace::from_toml_str(SMALL_SPACE_TOML).unwrap(),
        )
    }

    fn point(space: &ParameterSpace, pes: f64, buffer: f64, spad: f64, df: &str) -> DesignPoint {
        let mut m = BTreeMap::new();
        m.insert("NumPEs".to_string(), ParamValue::Number(pes));
        m.insert("GlobalBufferKB".to_string(), ParamValue::Number(buffer));
        m.insert("PESPadKB".to_string(), ParamValue::Number(spad));
        m.insert("Dataflow".to_string(), ParamValue::Label(df.to_string()));
        space.from_map(&m).unwrap()
    }

    #[test]
    fn doubling_pes_halves_compute_bound_latency() {
        let (model, space) = setup();
        let w = model.workload("vgg16_conv2").unwrap();
        let a = model.evaluate(&space, &point(&space, 56.0, 256.0, 1.0, "OS"), &w).unwrap();
        let b = model.evaluate(&space, &point(&space, 112.0, 256.0, 1.0, "OS"), &w).unwrap();
        let ra = model.roofline(&space, &point(&space, 56.0, 256.0, 1.0, "OS"), &w).unwrap();
        assert!(ra.compute_time > ra.memory_time);
        let ratio = b.get("latency").unwrap() / a.get("latency").unwrap();
        assert!((ratio - 0.5).abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn memory_bound_latency_ignores_pes() {
        let (model, space) = setup();
        let w = model.workload("mobilenet_dw").unwrap();
        let p1 = point(&space, 168.0, 64.0, 0.5, "WS");
        let p2 = point(&space, 252.0, 64.0, 0.5, "WS");
        let r1 = model.roofline(&space, &p1, &w).unwrap();
        assert!(r1.memory_time > r1.compute_time);
        let a = model.evaluate(&space, &p1, &w).unwrap();
        let b = model.evaluate(&space, &p2, &w).unwrap();
        assert_eq!(a.get("latency"), b.get("latency"));
    }

    #[test]
    fn area_strictly_increases_with_pes() {
        let (model, space) = setup();
        let w = model.workload("resnet50_conv3").unwrap();
        let mut last = 0.0f64;
        for k in 1..=24 {
            let pes = 14.0 * k as f64;
            // 0.5 KB scratchpads keep every PE count under the SRAM budget
            let obs = model.evaluate(&space, &point(&space, pes, 64.0, 0.5, "RS"), &w).unwrap();
            assert!(obs.valid);
            let area = obs.get("area").unwrap();
            assert!(area > last);
            last = area;
        }
    }

    #[test]
    fn oversized_sram_is_infeasible() {
        let (model, space) = setup();
        let w = model.workload("vgg16_conv2").unwrap();
        // 512 + 336 * 2 = 1184 KB > 1024 KB
        let obs = model.evaluate(&space, &point(&space, 336.0, 512.0, 2.0, "RS"), &w).unwrap();
        assert!(!obs.valid);
        assert!(obs.metrics.is_empty());
        let ok = model.evaluate(&space, &point(&space, 14.0, 512.0, 2.0, "RS"), &w).unwrap();
        assert!(ok.valid);
    }

    #[test]
    fn golden_reference_observation() {
        let model = AccelModel::from_fixture().unwrap();
        let full = ParameterSpace::from_toml_str(SPACE_TOML).unwrap();
        let p = full.from_map(model.reference()).unwrap();
        let w = model.workload("resnet50_conv3").unwrap();
        let obs = model.evaluate(&full, &p, &w).unwrap();
        // by hand: 168 PEs, 256 KB buffer, 1 KB scratchpads, RS, 1 MAC/PE
        let macs: f64 = 115605504.0;
        let bytes = 100352.0 + 147456.0 + 100352.0;
        let compute = macs / (168.0 * 1.0e9 * 0.95);
        let dram = bytes * (1.0 + 0.6 * 128.0 / 256.0 + 0.3 / 1.0);
        let latency = compute.max(dram / 16.0e9);
        let area = 1.0 + 168.0 * 0.05 + 0.004 * (256.0 + 168.0);
        let energy = macs * (0.2e-12 + 0.08e-12) + dram * 100.0e-12 + 0.01 * area * latency;
        assert_eq!(obs.get("latency").unwrap(), latency);
        assert!((obs.get("area").unwrap() - area).abs() < 1e-12);
        assert!((obs.get("energy").unwrap() - energy).abs() < 1e-15);
    }
}
