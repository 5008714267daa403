//! Builds a small linked scene with console commands, shows that a bad line
//! rolls back the whole script, and prints the snapshot and a thumbnail.
//!
//! cargo run -p dccflow --example dcc_console [thumbnail.svg]

use dccflow::dcc::server::run_console;
use dccflow::dcc::{render_thumbnail, snapshot, Scene};

const HOUSE: &str = "\
add plane ground width=10 depth=10
add cube wall width=4 depth=3 height=2.5
add cube roof width=4.4 depth=3.4 height=0.4
# the roof sits on the wall and follows its height
link roof.z = wall.height
add light lamp power=60 emit_color=\"#ffd9a0\"
link lamp.z = roof.z + roof.height + 0.5";

fn main() {
    let mut scene = Scene::new();
    println!("{}\n", run_console(&mut scene, HOUSE).expect("house script"));

    println!("{}", run_console(&mut scene, "set wall.height 3\nquery lamp").unwrap());

    let before = snapshot(&scene);
    let err = run_console(&mut scene, "set wall.height 4\nlink wall.height = lamp.z").unwrap_err();
    println!("rejected: {err}");
    assert_eq!(snapshot(&scene), before, "a failed script leaves the scene alone");

    println!("\n{}", snapshot(&scene));
    let svg = render_thumbnail(&scene);
    match std::env::args().nth(1) {
        Some(path) => {
            std::fs::write(&path, svg).expect("write thumbnail");
            println!("thumbnail written to {path}");
        }
        None => println!("thumbnail: {} bytes of SVG", svg.len()),
    }
}
