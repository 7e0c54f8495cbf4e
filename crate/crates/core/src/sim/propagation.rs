use super::SimError;

/// Speed of light used for wavelengths, m/s. With it a 300 MHz carrier has a 1 m wavelength.
pub const WAVE_SPEED: f64 = 3.0e8;
/// Speed of light used for propagation delays, m/s.
pub const DELAY_SPEED: f64 = 2.998e8;

/// Two-ray ground reflection with a free-space near field.
///
/// Below the crossover distance `d_c = 4π·ht·hr·f/c` the loss is free space,
/// `20·log10(4π·d·f/c)`; at and beyond it the far-field two-ray form
/// `40·log10(d) − 20·log10(ht·hr)` applies. The two meet exactly at `d_c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoRayGround {
    pub frequency_hz: f64,
    pub tx_height_m: f64,
    pub rx_height_m: f64,
}

impl TwoRayGround {
    pub fn crossover_m(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.tx_height_m * self.rx_height_m * self.frequency_hz / WAVE_SPEED
    }

    pub fn free_space_db(&self, distance_m: f64) -> f64 {
        20.0 * (4.0 * std::f64::consts::PI * distance_m * self.frequency_hz / WAVE_SPEED).log10()
    }

    pub fn two_ray_db(&self, distance_m: f64) -> f64 {
        40.0 * distance_m.log10() - 20.0 * (self.tx_height_m * self.rx_height_m).log10()
    }

    pub fn path_loss_db(&self, distance_m: f64) -> Result<f64, SimError> {
        if !(distance_m > 0.0 && distance_m.is_finite()) {
            return Err(SimError::Domain(format!("distance must be positive, got {distance_m}")));
        }
        Ok(if distance_m < self.crossover_m() {
            self.free_space_db(distance_m)
        } else {
            self.two_ray_db(distance_m)
        })
    }

    /// Largest distance whose loss does not exceed `loss_db`.
    pub fn range_m(&self, loss_db: f64) -> f64 {
        let far = 10f64.powf((loss_db + 20.0 * (self.tx_height_m * self.rx_height_m).log10()) / 40.0);
        if far >= self.crossover_m() {
            far
        } else {
            10f64.powf(loss_db / 20.0) * WAVE_SPEED / (4.0 * std::f64::consts::PI * self.frequency_hz)
        }
    }
}

pub fn propagation_delay_s(distance_m: f64) -> f64 {
    distance_m / DELAY_SPEED
}
