//! Minimal grouped bar chart: one group per policy, one bar per
//! distribution (in table column order), SEM whiskers, gridlines every 0.25.
//! No text is drawn; the JSON and the printed table carry the labels.

use vista_core::imaging::{Rgb, RgbImage};

use crate::commands::CompareTable;

const HEIGHT: u32 = 240;
const MARGIN: u32 = 20;
const BAR: u32 = 18;
const GAP: u32 = 24;

const PALETTE: [[u8; 3]; 6] = [
    [66, 110, 180],
    [221, 132, 82],
    [85, 168, 104],
    [196, 78, 82],
    [129, 114, 178],
    [147, 120, 96],
];

fn fill(img: &mut RgbImage, x0: u32, x1: u32, y0: u32, y1: u32, c: [u8; 3]) {
    for y in y0.min(img.height())..y1.min(img.height()) {
        for x in x0.min(img.width())..x1.min(img.width()) {
            img.put_pixel(x, y, Rgb(c));
        }
    }
}

pub fn bar_chart(t: &CompareTable) -> RgbImage {
    let groups = t.rows.len() as u32;
    let bars = t.distributions.len() as u32;
    let width = 2 * MARGIN + groups * bars * BAR + groups.saturating_sub(1) * GAP;
    let mut img = RgbImage::from_pixel(width.max(2 * MARGIN + 1), HEIGHT, Rgb([255, 255, 255]));
    let plot_h = HEIGHT - 2 * MARGIN;
    let y_of = |v: f64| MARGIN + plot_h - (v.clamp(0.0, 1.0) * plot_h as f64).round() as u32;
    for q in 0..=4 {
        let y = y_of(q as f64 / 4.0);
        fill(&mut img, MARGIN, width - MARGIN, y, y + 1, [225, 225, 225]);
    }
    for (g, row) in t.rows.iter().enumerate() {
        for (b, cell) in row.cells.iter().enumerate() {
            let x0 = MARGIN + g as u32 * (bars * BAR + GAP) + b as u32 * BAR;
            let top = y_of(cell.mean);
            fill(&mut img, x0 + 2, x0 + BAR - 2, top, MARGIN + plot_h, PALETTE[b % PALETTE.len()]);
            let (lo, hi) = (y_of(cell.mean - cell.sem), y_of(cell.mean + cell.sem));
            let mid = x0 + BAR / 2;
            fill(&mut img, mid, mid + 1, hi, lo + 1, [0, 0, 0]);
            fill(&mut img, mid - 3, mid + 4, hi, hi + 1, [0, 0, 0]);
            fill(&mut img, mid - 3, mid + 4, lo, lo + 1, [0, 0, 0]);
        }
    }
    fill(&mut img, MARGIN, width - MARGIN, MARGIN + plot_h, MARGIN + plot_h + 1, [0, 0, 0]);
    img
}
