//! Encode a bitmap to COCO run-length form, rasterize a polygon and compare
//! the two masks.

use layout_ensemble::mask::{
    decode_rle, encode_rle, mask_dice, mask_iou, mask_to_bbox, rasterize_polygon, Bitmap, Polygon,
    RleJson,
};

fn main() -> layout_ensemble::Result<()> {
    let (h, w) = (6, 8);
    let mut bitmap = Bitmap::new(h, w)?;
    for row in 1..4 {
        for col in 2..6 {
            bitmap.set(row, col, true);
        }
    }
    let rect = encode_rle(&bitmap);
    println!("counts {:?}", rect.counts());
    println!("json   {}", serde_json::to_string(&RleJson::from(&rect)).unwrap());
    assert_eq!(decode_rle(&rect)?, bitmap);

    // a triangle given as x, y pairs
    let tri = Polygon::from_flat(&[1.0, 0.0, 7.0, 0.0, 1.0, 6.0])?;
    let tri = rasterize_polygon(&tri, h, w)?;
    for row in 0..h {
        let line: String = (0..w)
            .map(|col| match (decode_rle(&rect)?.get(row, col), decode_rle(&tri)?.get(row, col)) {
                (true, true) => Ok('#'),
                (true, false) => Ok('r'),
                (false, true) => Ok('t'),
                _ => Ok('.'),
            })
            .collect::<layout_ensemble::Result<_>>()?;
        println!("{line}");
    }
    println!("bbox of triangle {:?}", mask_to_bbox(&tri)?);
    println!("IoU  {:.4}", mask_iou(&rect, &tri)?);
    println!("dice {:.4}", mask_dice(&rect, &tri)?);
    Ok(())
}
