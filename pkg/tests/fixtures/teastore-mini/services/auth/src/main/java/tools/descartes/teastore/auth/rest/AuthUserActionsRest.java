package tools.descartes.teastore.auth.rest;

import javax.ws.rs.POST;
import javax.ws.rs.Path;
import javax.ws.rs.QueryParam;
import javax.ws.rs.core.Response;
import tools.descartes.teastore.auth.security.BCryptProvider;

/**
 * Login and logout for store users.
 */
@Path("useractions")
public class AuthUserActionsRest {

    @POST
    @Path("login")
    public Response login(@QueryParam("name") String name, @QueryParam("password") String password) {
        if (BCryptProvider.checkPassword(password, lookupHash(name))) {
            return Response.status(Response.Status.OK).build();
        }
        return Response.status(Response.Status.UNAUTHORIZED).build();
    }

    @POST
    @Path("logout")
    public Response logout(String token) {
        return Response.status(Response.Status.OK).build();
    }

    private String lookupHash(String name) {
        return name == null ? null : name.trim();
    }
}
