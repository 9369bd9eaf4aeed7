use nlspike::{models::*, coefficients::*, distributions::*, spectral::*};
use std::time::Instant;
fn main(){
  for (f,g) in [(NonlinearitySpec::Identity,0.5),(NonlinearitySpec::Identity,2.0),(NonlinearitySpec::Abs,0.4*4000f64.powf(0.25)),(NonlinearitySpec::Abs,1.2*4000f64.powf(0.25))]{
   let t=Instant::now();
   let c=SpikedModelConfig{n:4000,f,noise:NoiseSpec::gaussian(),signal:SignalSpec::gaussian(),gamma:g,seed:SeededStream::new(1,2),couple_to_null:false};
   let m=build_spiked(&c).unwrap();
   let tb=t.elapsed();
   let r=leading_eigenpair(&m.y,&SolverOptions::default()).unwrap();
   println!("build {:?} total {:?} lam {} it {} res {:e} ov {}",tb,t.elapsed(),r.lambda1,r.iterations,r.residual, overlap(&r.v1,&m.x,1).unwrap());
  }
}
