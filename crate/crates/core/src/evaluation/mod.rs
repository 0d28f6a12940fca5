//! Metric orchestration: FID*/U-IDS* reports, remover ranking and the
//! sample-size stability study.

mod rank;
mod report;
mod stability;

pub use rank::{metric_direction, rank_removers, Direction, MetricRanking};
pub use report::{
    evaluate_unpaired, ComparisonDescriptor, ComparisonSet, ConfigEcho, JitterEvent,
    MetricReport, QueryDescriptor, QuerySet, SvmFitRows, FID, FID_STAR, LPIPS_MEAN, P_IDS, PSNR,
    SSIM, U_IDS, U_IDS_STAR,
};
pub use stability::{
    relative_std_percent, subsample_stability, StabilityOptions, StabilityRow, StabilityTable,
};
