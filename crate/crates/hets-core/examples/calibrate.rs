use hets_core::nn::{self, fixtures, Layer};
fn main() {
    let dir = std::env::temp_dir().join("hets_dbg_fixture");
    fixtures::write_fixtures(&dir).unwrap();
    let loaded = nn::load_model(&dir.join("mnist_cnn.json")).unwrap();
    let gen = fixtures::mnist_model(fixtures::MNIST_MODEL_SEED);
    assert_eq!(loaded.version, gen.version);
    assert_eq!(loaded.input_shape, gen.input_shape);
    for (i, (a, b)) in loaded.layers.iter().zip(&gen.layers).enumerate() {
        if a != b {
            println!("layer {i} differs");
            if let (Layer::Conv2d { kernels: ka, bias: ba, .. }, Layer::Conv2d { kernels: kb, bias: bb, .. }) = (a, b) {
                for (j, (x, y)) in ka.iter().zip(kb).enumerate() {
                    if x != y {
                        for (t, (p, q)) in x.data.iter().zip(&y.data).enumerate() {
                            if p != q { println!("kernel {j} tap {t}: {p:?} vs {q:?} bits {:x} {:x}", p.to_bits(), q.to_bits()); break; }
                        }
                        break;
                    }
                }
                if ba != bb { println!("bias {ba:?} vs {bb:?}"); }
            }
            if let (Layer::Linear { weights: wa, bias: ba }, Layer::Linear { weights: wb, bias: bb }) = (a, b) {
                for (t, (p, q)) in wa.data.iter().zip(&wb.data).enumerate() {
                    if p != q { println!("weight {t}: {p:?} vs {q:?} bits {:x} {:x}", p.to_bits(), q.to_bits()); break; }
                }
                if ba != bb { for (t,(p,q)) in ba.iter().zip(bb).enumerate() { if p != q { println!("bias {t}: {p:?} vs {q:?}"); break; } } }
            }
        }
    }
    println!("done");
}
