fn main() { println!("curvopt placeholder"); }
