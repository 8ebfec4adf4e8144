//! Gantt renderings of a schedule: a JSON model and an SVG drawing.
//!
//! The drawing follows the usual figure conventions: one row per machine,
//! job boxes coloured by family, hatched setup intervals, green release
//! ticks and red brackets under each family block.

use std::fmt::Write as _;

use serde::Serialize;

use sbatch_core::model::{FamilyId, Instance, JobId, Schedule, Time};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GanttJob {
    pub id: JobId,
    pub family: FamilyId,
    pub start: Time,
    pub end: Time,
    pub release: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GanttBlock {
    pub family: FamilyId,
    pub start: Time,
    pub end: Time,
    pub jobs: Vec<JobId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GanttSetup {
    /// `0` is the initial state.
    pub from: usize,
    pub to: FamilyId,
    pub start: Time,
    pub end: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GanttRow {
    pub machine: usize,
    pub jobs: Vec<GanttJob>,
    pub blocks: Vec<GanttBlock>,
    pub setups: Vec<GanttSetup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReleaseMarker {
    pub job: JobId,
    pub machine: usize,
    pub time: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Gantt {
    pub horizon: Time,
    pub machines: Vec<GanttRow>,
    pub releases: Vec<ReleaseMarker>,
}

/// Builds the chart model. `sched` must be a partition of `inst`'s jobs.
pub fn build(inst: &Instance, sched: &Schedule) -> Gantt {
    let mut releases = Vec::new();
    let mut horizon = 0;
    let machines = sched
        .assignment
        .sequences
        .iter()
        .enumerate()
        .map(|(m, seq)| {
            let mut row = GanttRow {
                machine: m + 1,
                jobs: Vec::new(),
                blocks: Vec::new(),
                setups: Vec::new(),
            };
            let mut state = 0;
            for &id in seq {
                let job = inst.job(id).expect("schedule job in instance");
                let start = sched.start[&id];
                let end = start + job.ptime;
                horizon = horizon.max(end);
                if job.family != state {
                    let len = inst.setups.transition(state, job.family);
                    if len > 0 {
                        row.setups.push(GanttSetup {
                            from: state,
                            to: job.family,
                            start: start - len,
                            end: start,
                        });
                    }
                    row.blocks.push(GanttBlock {
                        family: job.family,
                        start,
                        end,
                        jobs: Vec::new(),
                    });
                    state = job.family;
                }
                let block = row.blocks.last_mut().unwrap();
                block.end = end;
                block.jobs.push(id);
                row.jobs.push(GanttJob {
                    id,
                    family: job.family,
                    start,
                    end,
                    release: job.release,
                });
                releases.push(ReleaseMarker {
                    job: id,
                    machine: m + 1,
                    time: job.release,
                });
            }
            row
        })
        .collect();
    Gantt {
        horizon,
        machines,
        releases,
    }
}

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#b07aa1", "#edc948", "#76b7b2", "#ff9da7", "#9c755f",
];
const UNIT: i64 = 24;
const ROW: i64 = 56;
const BOX: i64 = 28;
const LEFT: i64 = 48;
const TOP: i64 = 16;

fn family_colour(family: FamilyId) -> &'static str {
    PALETTE[(family.max(1) - 1) % PALETTE.len()]
}

pub fn render_svg(chart: &Gantt) -> String {
    let x = |t: Time| LEFT + t * UNIT;
    let width = x(chart.horizon) + UNIT;
    let height = TOP + ROW * chart.machines.len() as i64 + 24;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    s.push_str(concat!(
        r#"<defs><pattern id="setup" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">"#,
        r##"<line x1="0" y1="0" x2="0" y2="6" stroke="#888" stroke-width="2"/></pattern></defs>"##,
        "\n"
    ));

    for (r, row) in chart.machines.iter().enumerate() {
        let y = TOP + ROW * r as i64;
        let _ = writeln!(
            s,
            r#"<text x="4" y="{}">M{}</text>"#,
            y + BOX / 2 + 4,
            row.machine
        );
        for st in &row.setups {
            let _ = writeln!(
                s,
                r##"<rect class="setup" x="{}" y="{y}" width="{}" height="{BOX}" fill="url(#setup)" stroke="#888"/>"##,
                x(st.start),
                (st.end - st.start) * UNIT
            );
        }
        for job in &row.jobs {
            let _ = writeln!(
                s,
                r##"<rect class="job" data-id="{}" x="{}" y="{y}" width="{}" height="{BOX}" fill="{}" stroke="#222"/>"##,
                job.id,
                x(job.start),
                (job.end - job.start) * UNIT,
                family_colour(job.family)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                x(job.start) + (job.end - job.start) * UNIT / 2,
                y + BOX / 2 + 4,
                job.id
            );
        }
        for block in &row.blocks {
            let (x0, x1, yb) = (x(block.start), x(block.end), y + BOX + 4);
            let _ = writeln!(
                s,
                r##"<path class="block" d="M{x0} {} V{yb} H{x1} V{}" fill="none" stroke="#d62728" stroke-width="2"/>"##,
                yb - 4,
                yb - 4
            );
        }
    }
    for rel in &chart.releases {
        let y = TOP + ROW * (rel.machine as i64 - 1);
        let _ = writeln!(
            s,
            r##"<line class="release" x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#2ca02c" stroke-width="2"/>"##,
            x(rel.time),
            y - 6,
            y
        );
    }
    let axis_y = TOP + ROW * chart.machines.len() as i64;
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="#000"/>"##,
        x(chart.horizon)
    );
    for t in 0..=chart.horizon {
        if t % 5 == 0 {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#,
                x(t),
                axis_y + 14
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
