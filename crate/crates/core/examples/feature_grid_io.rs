//! Write a feature grid to the MSFG format, read it back, and map a mask onto
//! its patch layout.

use memprompt::tensor_io::{
    downsample_to_layout, l2_normalize_grid, read_feature_grid, write_feature_grid, BinaryMask,
    FeatureGrid, GridLayout,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let layout = GridLayout::native(100, 130, 16);
    let dim = 3;
    let data: Vec<f32> = (0..layout.len())
        .flat_map(|i| [1.0, i as f32, 0.5])
        .collect();
    let grid = l2_normalize_grid(FeatureGrid::new(layout, dim, data)?)?;
    println!("grid {}x{} x{}, patch {} px", grid.rows(), grid.cols(), grid.dim(), grid.patch_size());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("features.msfg");
    write_feature_grid(&grid, &path)?;
    let back = read_feature_grid(&path)?;
    assert_eq!(back, grid);
    println!("round trip ok, {} bytes", std::fs::metadata(&path)?.len());

    for i in [0, grid.len() / 2, grid.len() - 1] {
        println!("patch {i:>3} center {:?}", grid.patch_center(i)?);
    }

    let mask = BinaryMask::from_fn(100, 130, |x, y| (20..60).contains(&x) && (30..90).contains(&y));
    let labels = downsample_to_layout(&mask, grid.layout())?;
    for r in 0..labels.rows() {
        let row: String = (0..labels.cols())
            .map(|c| if labels.is_foreground((r * labels.cols() + c) as usize) { '#' } else { '.' })
            .collect();
        println!("{row}");
    }
    Ok(())
}
