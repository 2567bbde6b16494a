use ecseq::forbidden::two_level_family;
use ecseq::*;
fn main() {
    for (a,b,e) in [(3u32,5u32,4u32),(3,5,8),(2,3,4),(7,10,4)] {
        let t = std::time::Instant::now();
        let built = two_level_family(&Ratio::new(a,b).unwrap(), &ExactProb::new(1u32,e).unwrap(), 1, &RandomSource::new(1)).unwrap();
        println!("{a}/{b} eps 1/{e}: {:?} worst {} {:?}", built.certificate.lengths, built.certificate.worst_case_miss.to_f64(), t.elapsed());
    }
}
