//! Full parameter record, defaults, quantization and the flat key=value
//! config format.

use crate::bipolar::BipolarParams;
use crate::error::RetinaError;
use crate::fixedpoint::{quantize, FixedPointFormat};
use crate::ganglion::GanglionParams;
use crate::opl::OplParams;

/// Every model parameter plus geometry and datapath format. Field names
/// match the config keys one-to-one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetinaParams {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub pixels_per_degree: f64,
    pub total_bits: u32,
    pub frac_bits: u32,

    pub sigma_c: f64,
    pub tau_c: f64,
    pub tau_u: f64,
    pub w_c: f64,
    pub sigma_s: f64,
    pub tau_s: f64,
    pub lambda_opl: f64,
    pub omega_opl: f64,

    pub sigma_a: f64,
    pub tau_a: f64,
    pub g0_a: f64,
    pub lambda_a: f64,
    pub inputamp: f64,

    pub tau_g: f64,
    pub w_g: f64,
    pub xi: i32,
    pub lambda_g: f64,
    pub i0_g: f64,
    pub v0_g: f64,
    pub g_leak: f64,
    pub tau_step: f64,
    pub refr: u32,
    pub v_threshold: f64,
}

impl Default for RetinaParams {
    fn default() -> Self {
        RetinaParams {
            width: 128,
            height: 128,
            fps: 200.0,
            pixels_per_degree: 20.0,
            total_bits: 19,
            frac_bits: 10,

            sigma_c: 0.05,
            tau_c: 0.010,
            tau_u: 0.010,
            w_c: 1.0,
            sigma_s: 0.15,
            tau_s: 0.010,
            lambda_opl: 1.0,
            omega_opl: 0.5,

            sigma_a: 0.05,
            tau_a: 0.005,
            g0_a: 50.0,
            lambda_a: 0.0,
            // scaled so the shunting target equals the outer-layer current
            // at the default conductance floor
            inputamp: 50.0,

            tau_g: 0.020,
            w_g: 1.0,
            xi: 1,
            lambda_g: 5.0,
            i0_g: 0.008,
            v0_g: 0.0,
            g_leak: 0.1,
            // membrane update counts in frames
            tau_step: 1.0,
            refr: 2,
            v_threshold: 1.0,
        }
    }
}

/// One parameter before and after quantization, for manifests and echo
/// checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEcho {
    pub name: &'static str,
    pub requested: f64,
    pub quantized: f64,
}

impl RetinaParams {
    pub fn format(&self) -> Result<FixedPointFormat, RetinaError> {
        FixedPointFormat::new(self.total_bits, self.frac_bits)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fps
    }

    pub fn validate(&self) -> Result<(), RetinaError> {
        self.format()?;
        if self.width == 0 || self.height == 0 {
            return Err(RetinaError::InvalidParameter("zero-area geometry".into()));
        }
        if self.fps <= 0.0 {
            return Err(RetinaError::InvalidParameter("fps must be positive".into()));
        }
        if self.pixels_per_degree <= 0.0 {
            return Err(RetinaError::InvalidParameter(
                "pixels_per_degree must be positive".into(),
            ));
        }
        for (name, v) in [
            ("sigma_c", self.sigma_c),
            ("tau_c", self.tau_c),
            ("tau_u", self.tau_u),
            ("sigma_s", self.sigma_s),
            ("tau_s", self.tau_s),
            ("sigma_a", self.sigma_a),
            ("tau_a", self.tau_a),
            ("tau_g", self.tau_g),
        ] {
            if v <= 0.0 {
                return Err(RetinaError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [("w_c", self.w_c), ("w_g", self.w_g), ("omega_opl", self.omega_opl)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(RetinaError::InvalidParameter(format!(
                    "{name} must be in [0,1], got {v}"
                )));
            }
        }
        self.bipolar().validate()?;
        self.ganglion().validate()?;
        Ok(())
    }

    pub fn opl(&self) -> OplParams {
        OplParams {
            sigma_c: self.sigma_c,
            tau_c: self.tau_c,
            tau_u: self.tau_u,
            w_c: self.w_c,
            sigma_s: self.sigma_s,
            tau_s: self.tau_s,
            lambda_opl: self.lambda_opl,
            omega_opl: self.omega_opl,
        }
    }

    pub fn bipolar(&self) -> BipolarParams {
        BipolarParams {
            sigma_a: self.sigma_a,
            tau_a: self.tau_a,
            g0_a: self.g0_a,
            lambda_a: self.lambda_a,
            inputamp: self.inputamp,
            dt: self.dt(),
        }
    }

    pub fn ganglion(&self) -> GanglionParams {
        GanglionParams {
            tau_g: self.tau_g,
            w_g: self.w_g,
            xi: self.xi,
            lambda_g: self.lambda_g,
            i0_g: self.i0_g,
            v0_g: self.v0_g,
            g_leak: self.g_leak,
            tau_step: self.tau_step,
            refr: self.refr,
            v_threshold: self.v_threshold,
            dt: self.dt(),
        }
    }

    /// Model values replaced by their fixed-point representations;
    /// geometry, format and the per-frame interval are structural and stay
    /// as requested. The stored integration interval (`steps`) is quantized
    /// by the stages themselves via `dt` consumers.
    pub fn quantized(&self) -> Result<RetinaParams, RetinaError> {
        let fmt = self.format()?;
        let q = |x: f64| quantize(x, fmt).to_real();
        Ok(RetinaParams {
            width: self.width,
            height: self.height,
            fps: self.fps,
            pixels_per_degree: self.pixels_per_degree,
            total_bits: self.total_bits,
            frac_bits: self.frac_bits,
            sigma_c: q(self.sigma_c),
            tau_c: q(self.tau_c),
            tau_u: q(self.tau_u),
            w_c: q(self.w_c),
            sigma_s: q(self.sigma_s),
            tau_s: q(self.tau_s),
            lambda_opl: q(self.lambda_opl),
            omega_opl: q(self.omega_opl),
            sigma_a: q(self.sigma_a),
            tau_a: q(self.tau_a),
            g0_a: q(self.g0_a),
            lambda_a: q(self.lambda_a),
            inputamp: q(self.inputamp),
            tau_g: q(self.tau_g),
            w_g: q(self.w_g),
            xi: self.xi,
            lambda_g: q(self.lambda_g),
            i0_g: q(self.i0_g),
            v0_g: q(self.v0_g),
            g_leak: q(self.g_leak),
            tau_step: q(self.tau_step),
            refr: self.refr,
            v_threshold: q(self.v_threshold),
        })
    }

    /// Requested vs quantized value for every model parameter.
    pub fn echo(&self) -> Result<Vec<ParamEcho>, RetinaError> {
        let q = self.quantized()?;
        let pairs: [(&'static str, f64, f64); 19] = [
            ("sigma_c", self.sigma_c, q.sigma_c),
            ("tau_c", self.tau_c, q.tau_c),
            ("tau_u", self.tau_u, q.tau_u),
            ("w_c", self.w_c, q.w_c),
            ("sigma_s", self.sigma_s, q.sigma_s),
            ("tau_s", self.tau_s, q.tau_s),
            ("lambda_opl", self.lambda_opl, q.lambda_opl),
            ("omega_opl", self.omega_opl, q.omega_opl),
            ("sigma_a", self.sigma_a, q.sigma_a),
            ("tau_a", self.tau_a, q.tau_a),
            ("g0_a", self.g0_a, q.g0_a),
            ("lambda_a", self.lambda_a, q.lambda_a),
            ("inputamp", self.inputamp, q.inputamp),
            ("tau_g", self.tau_g, q.tau_g),
            ("w_g", self.w_g, q.w_g),
            ("lambda_g", self.lambda_g, q.lambda_g),
            ("i0_g", self.i0_g, q.i0_g),
            ("v0_g", self.v0_g, q.v0_g),
            ("g_leak", self.g_leak, q.g_leak),
        ];
        Ok(pairs
            .into_iter()
            .map(|(name, requested, quantized)| ParamEcho {
                name,
                requested,
                quantized,
            })
            .collect())
    }

    /// Parse the flat `key=value` config format; unknown keys are errors.
    pub fn from_config(text: &str) -> Result<RetinaParams, RetinaError> {
        let mut params = RetinaParams::default();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                RetinaError::Config(format!("line {}: expected key=value, got `{line}`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| RetinaError::Config(format!("line {}: bad {what}: {value}", lineno + 1));
            let fval = || value.parse::<f64>().map_err(|_| bad(key));
            match key {
                "width" => params.width = value.parse().map_err(|_| bad("width"))?,
                "height" => params.height = value.parse().map_err(|_| bad("height"))?,
                "fps" => params.fps = fval()?,
                "pixels_per_degree" => params.pixels_per_degree = fval()?,
                "total_bits" => params.total_bits = value.parse().map_err(|_| bad("total_bits"))?,
                "frac_bits" => params.frac_bits = value.parse().map_err(|_| bad("frac_bits"))?,
                "sigma_c" => params.sigma_c = fval()?,
                "tau_c" => params.tau_c = fval()?,
                "tau_u" => params.tau_u = fval()?,
                "w_c" => params.w_c = fval()?,
                "sigma_s" => params.sigma_s = fval()?,
                "tau_s" => params.tau_s = fval()?,
                "lambda_opl" => params.lambda_opl = fval()?,
                "omega_opl" => params.omega_opl = fval()?,
                "sigma_a" => params.sigma_a = fval()?,
                "tau_a" => params.tau_a = fval()?,
                "g0_a" => params.g0_a = fval()?,
                "lambda_a" => params.lambda_a = fval()?,
                "inputamp" => params.inputamp = fval()?,
                "tau_g" => params.tau_g = fval()?,
                "w_g" => params.w_g = fval()?,
                "xi" => {
                    params.xi = value
                        .trim_start_matches('+')
                        .parse()
                        .map_err(|_| bad("xi"))?
                }
                "lambda_g" => params.lambda_g = fval()?,
                "i0_g" => params.i0_g = fval()?,
                "v0_g" => params.v0_g = fval()?,
                "g_leak" => params.g_leak = fval()?,
                "tau_step" => params.tau_step = fval()?,
                "refr" => params.refr = value.parse().map_err(|_| bad("refr"))?,
                "v_threshold" => params.v_threshold = fval()?,
                other => {
                    return Err(RetinaError::Config(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        params.validate()?;
        Ok(params)
    }

    pub fn to_config(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("width", self.width.to_string());
        kv("height", self.height.to_string());
        kv("fps", self.fps.to_string());
        kv("pixels_per_degree", self.pixels_per_degree.to_string());
        kv("total_bits", self.total_bits.to_string());
        kv("frac_bits", self.frac_bits.to_string());
        kv("sigma_c", self.sigma_c.to_string());
        kv("tau_c", self.tau_c.to_string());
        kv("tau_u", self.tau_u.to_string());
        kv("w_c", self.w_c.to_string());
        kv("sigma_s", self.sigma_s.to_string());
        kv("tau_s", self.tau_s.to_string());
        kv("lambda_opl", self.lambda_opl.to_string());
        kv("omega_opl", self.omega_opl.to_string());
        kv("sigma_a", self.sigma_a.to_string());
        kv("tau_a", self.tau_a.to_string());
        kv("g0_a", self.g0_a.to_string());
        kv("lambda_a", self.lambda_a.to_string());
        kv("inputamp", self.inputamp.to_string());
        kv("tau_g", self.tau_g.to_string());
        kv("w_g", self.w_g.to_string());
        kv("xi", self.xi.to_string());
        kv("lambda_g", self.lambda_g.to_string());
        kv("i0_g", self.i0_g.to_string());
        kv("v0_g", self.v0_g.to_string());
        kv("g_leak", self.g_leak.to_string());
        kv("tau_step", self.tau_step.to_string());
        kv("refr", self.refr.to_string());
        kv("v_threshold", self.v_threshold.to_string());
        s
    }
}
