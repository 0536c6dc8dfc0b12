//! Inputs: smart-meter loads, weather, holidays and prices, virtual
//! communities, chronological splits and the retail tariff.

mod community;
mod ingest;
mod series;
mod split;
pub mod synthetic;
mod tariff;

pub use community::{aggregate, sample_communities};
pub use ingest::{load_smart_meter, IngestOutcome, MeterReading, Rejection, SourceResolution, MAX_FILL_GAP_HOURS};
pub use series::{CommunityProfile, HolidayCalendar, LoadSeries, PriceSeries, WeatherSeries, WEATHER_COLUMNS};
pub use split::{make_split, DataSplit};
pub use tariff::{build_tariff, SpotSource, SyntheticSpot};
