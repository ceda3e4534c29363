use zorms::optimize;
use zorms::problems::PsdDistanceProblem;
use zorms::zorms::plan_convex;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = PsdDistanceProblem::new(3, 0)?;
    let plan = plan_convex(1.0, 0.5, problem.r_bar(), problem.n())?.with_iterations(200);
    let mut cost = problem.cost();
    let record = optimize(&mut cost, &problem.x0, &plan, 7)?;
    println!("best f = {} at k = {}", record.best_cost, record.best_k);
    Ok(())
}
