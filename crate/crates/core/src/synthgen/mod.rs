//! Synthetic standard load profiles for pretraining.
//!
//! A profile is built day by day from tabulated 24-hour shapes selected by
//! season band and day class (workday, Saturday, Sunday/holiday). Household
//! profiles are additionally modulated by a smooth day-of-year polynomial.
//! Each calendar year is scaled to the requested annual energy.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use chrono::{Datelike, NaiveDate, Weekday};

use crate::data::{HolidayCalendar, LoadSeries};
use crate::error::{Error, Result};
use crate::time::{date_hour, days_in_year};

/// Shape tables shipped with the crate.
pub const DEFAULT_TABLES: &str = include_str!("../../assets/load_profiles_v1.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProfileKind {
    Household,
    Commercial,
}

impl ProfileKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "household" => Some(ProfileKind::Household),
            "commercial" => Some(ProfileKind::Commercial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Season {
    Winter,
    Transition,
    Summer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DayClass {
    Workday,
    Saturday,
    /// Sundays and public holidays.
    Sunday,
}

impl DayClass {
    pub fn of(date: NaiveDate, calendar: &HolidayCalendar) -> DayClass {
        if calendar.is_holiday(date) {
            return DayClass::Sunday;
        }
        match date.weekday() {
            Weekday::Sat => DayClass::Saturday,
            Weekday::Sun => DayClass::Sunday,
            _ => DayClass::Workday,
        }
    }
}

/// Inclusive (month, day) band that may wrap around new year.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateBand {
    pub from: (u32, u32),
    pub to: (u32, u32),
}

impl DateBand {
    pub fn contains(&self, date: NaiveDate) -> bool {
        let md = (date.month(), date.day());
        if self.from <= self.to {
            self.from <= md && md <= self.to
        } else {
            md >= self.from || md <= self.to
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTables {
    pub version: u32,
    pub winter: DateBand,
    pub summer: DateBand,
    /// Coefficients c4..c0 of the household dynamization polynomial.
    pub dynamization: [f64; 5],
    shapes: BTreeMap<(ProfileKind, Season, DayClass), [f64; 24]>,
}

fn parse_month_day(s: &str, line: usize) -> Result<(u32, u32)> {
    let bad = || Error::Parse {
        line,
        message: format!("expected MM-DD, got {s:?}"),
    };
    let (m, d) = s.split_once('-').ok_or_else(bad)?;
    let m: u32 = m.parse().map_err(|_| bad())?;
    let d: u32 = d.parse().map_err(|_| bad())?;
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return Err(bad());
    }
    Ok((m, d))
}

impl ProfileTables {
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TABLES).expect("bundled profile tables are valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut winter = None;
        let mut summer = None;
        let mut dynamization = None;
        let mut shapes: BTreeMap<(ProfileKind, Season, DayClass), [Option<f64>; 24]> =
            BTreeMap::new();
        let mut in_rows = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            let err = |m: &str| Error::Parse {
                line,
                message: m.to_string(),
            };
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err("invalid number"))
            };
            match f[0] {
                "version" if !in_rows => {
                    version = Some(f.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| err("bad version"))?)
                }
                "band" if !in_rows => {
                    if f.len() != 4 {
                        return Err(err("band needs name,from,to"));
                    }
                    let band = DateBand {
                        from: parse_month_day(f[2], line)?,
                        to: parse_month_day(f[3], line)?,
                    };
                    match f[1] {
                        "winter" => winter = Some(band),
                        "summer" => summer = Some(band),
                        _ => return Err(err("unknown band")),
                    }
                }
                "poly" if !in_rows => {
                    if f.len() != 7 || f[1] != "household" {
                        return Err(err("poly needs household and five coefficients"));
                    }
                    let mut c = [0.0; 5];
                    for (k, s) in f[2..].iter().enumerate() {
                        c[k] = num(s)?;
                    }
                    dynamization = Some(c);
                }
                "profile" => in_rows = true,
                _ if in_rows => {
                    if f.len() != 5 {
                        return Err(err("row needs profile,season,day_class,hour,weight"));
                    }
                    let kind = ProfileKind::parse(f[0]).ok_or_else(|| err("unknown profile"))?;
                    let season = match f[1] {
                        "winter" => Season::Winter,
                        "transition" => Season::Transition,
                        "summer" => Season::Summer,
                        _ => return Err(err("unknown season")),
                    };
                    let class = match f[2] {
                        "workday" => DayClass::Workday,
                        "saturday" => DayClass::Saturday,
                        "sunday" => DayClass::Sunday,
                        _ => return Err(err("unknown day class")),
                    };
                    let hour: usize = f[3].parse().ok().filter(|h| *h < 24).ok_or_else(|| err("hour must be 0..23"))?;
                    let w = num(f[4])?;
                    if w < 0.0 {
                        return Err(err("weight must be non-negative"));
                    }
                    let slot = &mut shapes.entry((kind, season, class)).or_insert([None; 24])[hour];
                    if slot.replace(w).is_some() {
                        return Err(err("duplicate row"));
                    }
                }
                _ => return Err(err("unexpected header line")),
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            message: format!("profile tables lack {what}"),
        };
        let mut complete = BTreeMap::new();
        for (key, hours) in shapes {
            let mut arr = [0.0; 24];
            for (h, v) in hours.iter().enumerate() {
                arr[h] = v.ok_or_else(|| missing("a full 24-hour shape"))?;
            }
            complete.insert(key, arr);
        }
        Ok(ProfileTables {
            version: version.ok_or_else(|| missing("a version"))?,
            winter: winter.ok_or_else(|| missing("a winter band"))?,
            summer: summer.ok_or_else(|| missing("a summer band"))?,
            dynamization: dynamization.ok_or_else(|| missing("dynamization coefficients"))?,
            shapes: complete,
        })
    }

    pub fn season(&self, date: NaiveDate) -> Season {
        if self.winter.contains(date) {
            Season::Winter
        } else if self.summer.contains(date) {
            Season::Summer
        } else {
            Season::Transition
        }
    }

    pub fn shape(&self, kind: ProfileKind, season: Season, class: DayClass) -> Result<&[f64; 24]> {
        self.shapes
            .get(&(kind, season, class))
            .ok_or_else(|| Error::InvalidArgument(format!("no shape for {kind:?}/{season:?}/{class:?}")))
    }

    fn poly(&self, doy: u32) -> f64 {
        let t = f64::from(doy);
        self.dynamization.iter().fold(0.0, |acc, c| acc * t + c)
    }

    /// Day-of-year factor normalized to mean 1 over the calendar year.
    pub fn dynamization_factor(&self, date: NaiveDate) -> f64 {
        let n = days_in_year(date.year());
        let mean = (1..=n).map(|d| self.poly(d)).sum::<f64>() / f64::from(n);
        self.poly(date.ordinal()) / mean
    }

    /// Unscaled 24 values for one day.
    pub fn day_values(
        &self,
        kind: ProfileKind,
        date: NaiveDate,
        calendar: &HolidayCalendar,
    ) -> Result<[f64; 24]> {
        let mut v = *self.shape(kind, self.season(date), DayClass::of(date, calendar))?;
        if kind == ProfileKind::Household {
            let f = self.dynamization_factor(date);
            v.iter_mut().for_each(|x| *x *= f);
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub id: String,
    pub profile: ProfileKind,
    pub first_day: NaiveDate,
    /// Exclusive.
    pub end_day: NaiveDate,
    /// kWh per calendar year.
    pub annual_energy: f64,
    pub calendar: HolidayCalendar,
}

/// Hourly synthetic profile over `[first_day, end_day)`.
pub fn generate_profile(spec: &SyntheticSpec, tables: &ProfileTables) -> Result<LoadSeries> {
    if !(spec.annual_energy > 0.0) {
        return Err(Error::InvalidArgument("annual_energy must be positive".into()));
    }
    if spec.end_day <= spec.first_day {
        return Err(Error::InvalidArgument("synthetic profile range is empty".into()));
    }
    let mut year_scale = BTreeMap::new();
    let mut values = Vec::new();
    let mut day = spec.first_day;
    while day < spec.end_day {
        let year = day.year();
        let scale = match year_scale.get(&year) {
            Some(s) => *s,
            None => {
                let mut total = 0.0;
                let mut d = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
                while d.year() == year {
                    total += tables
                        .day_values(spec.profile, d, &spec.calendar)?
                        .iter()
                        .sum::<f64>();
                    d = d.succ_opt().unwrap();
                }
                let s = spec.annual_energy / total;
                year_scale.insert(year, s);
                s
            }
        };
        let v = tables.day_values(spec.profile, day, &spec.calendar)?;
        values.extend(v.iter().map(|x| x * scale));
        day = day.succ_opt().unwrap();
    }
    LoadSeries::new(spec.id.clone(), date_hour(spec.first_day), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn spec(first: NaiveDate, end: NaiveDate, cal: HolidayCalendar) -> SyntheticSpec {
        SyntheticSpec {
            id: "slp".into(),
            profile: ProfileKind::Household,
            first_day: first,
            end_day: end,
            annual_energy: 1000.0,
            calendar: cal,
        }
    }

    #[test]
    fn full_year_energy_and_length() {
        let t = ProfileTables::builtin();
        let s = generate_profile(&spec(d(2013, 1, 1), d(2014, 1, 1), HolidayCalendar::default()), &t).unwrap();
        assert_eq!(s.len(), 8760);
        let total: f64 = s.values().iter().sum();
        assert!((total - 1000.0).abs() <= 1.0, "total {total}");
        assert!(s.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn sunday_differs_from_monday() {
        let t = ProfileTables::builtin();
        // 2013-03-03 is a Sunday
        let s = generate_profile(&spec(d(2013, 3, 3), d(2013, 3, 5), HolidayCalendar::default()), &t).unwrap();
        let v = s.values();
        let linf = (0..24).map(|h| (v[h] - v[24 + h]).abs()).fold(0.0, f64::max);
        assert!(linf > 0.0);
    }

    #[test]
    fn holiday_uses_sunday_shape() {
        let t = ProfileTables::builtin();
        // Wednesday 2013-12-25 and Sunday 2013-12-22, both winter.
        let cal = HolidayCalendar::new("gb", [d(2013, 12, 25)]);
        let wed = *t
            .shape(ProfileKind::Household, t.season(d(2013, 12, 25)), DayClass::of(d(2013, 12, 25), &cal))
            .unwrap();
        let sun = *t
            .shape(ProfileKind::Household, t.season(d(2013, 12, 22)), DayClass::of(d(2013, 12, 22), &cal))
            .unwrap();
        assert_eq!(wed, sun);
    }

    #[test]
    fn dynamization_has_unit_mean() {
        let t = ProfileTables::builtin();
        let mut d0 = d(2012, 1, 1);
        let mut acc = 0.0;
        while d0.year() == 2012 {
            acc += t.dynamization_factor(d0);
            d0 = d0.succ_opt().unwrap();
        }
        assert!((acc / 366.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seasons_follow_bands() {
        let t = ProfileTables::builtin();
        assert_eq!(t.season(d(2013, 1, 10)), Season::Winter);
        assert_eq!(t.season(d(2013, 3, 20)), Season::Winter);
        assert_eq!(t.season(d(2013, 3, 21)), Season::Transition);
        assert_eq!(t.season(d(2013, 7, 1)), Season::Summer);
        assert_eq!(t.season(d(2013, 11, 1)), Season::Winter);
    }

    #[test]
    fn malformed_table_reports_line() {
        let err = ProfileTables::parse("version,1\nband,winter,13-01,03-20\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}

/// Pretraining windows from a household standard profile scaled so its mean
/// power equals `mean_kw`, over every buildable day in `[first_day, end_day)`.
/// Normalization is fit on these windows.
pub fn pretraining_dataset(
    tables: &ProfileTables,
    weather: &crate::data::WeatherSeries,
    calendar: &HolidayCalendar,
    first_day: NaiveDate,
    end_day: NaiveDate,
    mean_kw: f64,
) -> Result<crate::features::Dataset> {
    use crate::features::{build_windows, earliest_buildable_day, Dataset, Normalization};
    let spec = SyntheticSpec {
        id: "pretraining".to_string(),
        profile: ProfileKind::Household,
        first_day,
        end_day,
        annual_energy: mean_kw * 8760.0,
        calendar: calendar.clone(),
    };
    let load = generate_profile(&spec, tables)?;
    let start = earliest_buildable_day(&load, weather).max(first_day);
    let days = start.iter_days().take_while(|d| *d < end_day);
    let windows = build_windows(days, &load, weather, calendar)?;
    if windows.is_empty() {
        return Err(Error::EmptyDataset("pretraining range has no buildable day".into()));
    }
    let normalization = Normalization::fit(&windows)?;
    Ok(Dataset { windows, normalization })
}
