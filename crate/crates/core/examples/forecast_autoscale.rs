//! Forecasts a week ahead from thirty days of hourly usage and turns the
//! forecast peak into a quota decision.
//!
//! `cargo run --release --example forecast_autoscale`

use abase_lite::autoscale::{decide, AutoscaleConfig, ScalingState};
use abase_lite::domain::TenantId;
use abase_lite::forecast::{forecast, mape, ForecastConfig, MetricSeries, SyntheticSeries};

fn main() {
    let gen = SyntheticSeries {
        hours: 720,
        base: 400.0,
        amplitude: 150.0,
        period_hours: 24.0,
        growth_per_hour: 0.6,
        noise: 0.05,
        seed: 3,
    };
    let history = MetricSeries::new(0, gen.range(0, 720));
    let cfg = ForecastConfig::default();
    let result = forecast(&history, None, &cfg).expect("forecast");
    let actual = gen.range(720, 720 + cfg.horizon);
    println!(
        "period {:?} h, changepoint {:?}, weights {:.2}/{:.2}, MAPE {:.2}%",
        result.detected_period,
        result.changepoint,
        result.weights.seasonal_trend,
        result.weights.historical_average,
        100.0 * mape(&result.forecast, &actual)
    );
    println!("forecast peak U_max = {:.1} RU/s", result.u_max);

    let as_cfg = AutoscaleConfig::default();
    for quota in [1000.0, 1500.0, 3000.0] {
        let state = ScalingState {
            tenant: TenantId(0),
            tenant_quota: quota,
            partitions: 4,
            partition_quota: quota / 4.0,
            last_scale_us: None,
        };
        let d = decide(&state, result.u_max, 0, &as_cfg);
        println!(
            "quota {quota:>6.0}: {:?} -> quota {:.1}, {} partitions of {:.1}",
            d.action, d.new_tenant_quota, d.new_partitions, d.new_partition_quota
        );
    }
}
