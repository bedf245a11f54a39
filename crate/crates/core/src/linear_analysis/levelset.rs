use std::io::Write;

use super::chart::CoordinateChart;
use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::patch::GridSpec;

pub const LEVELSET_HEADER: [&str; 8] = ["x1", "x2", "p1", "p2", "z1_re", "z1_im", "z2_re", "z2_im"];

/// Writes chart values over a planar grid for contour plotting.
///
/// Points outside the chart domain keep their row with `NaN` coordinates so
/// the grid stays rectangular. Returns the number of guarded (valid) rows.
pub fn write_levelset_csv<W: Write>(
    chart: &dyn CoordinateChart,
    field: &VectorField,
    grid: &GridSpec,
    out: W,
) -> Result<usize> {
    if grid.patch.dim() != 2 || chart.input_dim() != 2 || chart.output_dim() != 2 {
        return Err(Error::InvalidArgument(
            "level-set export is defined for planar charts only".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LEVELSET_HEADER)?;
    let mut valid = 0;
    for x in grid.points() {
        let p = field.eval(&x)?;
        let mut row = vec![x[0].to_string(), x[1].to_string(), p[0].to_string(), p[1].to_string()];
        match chart.forward(&x) {
            Ok(z) => {
                valid += 1;
                for zi in z {
                    row.push(zi.re.to_string());
                    row.push(zi.im.to_string());
                }
            }
            Err(Error::SingularPoint { .. }) => row.extend(std::iter::repeat_n("NaN".to_string(), 4)),
            Err(e) => return Err(e),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(valid)
}
